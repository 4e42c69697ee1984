// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The revmatch Authors

#pragma once

#include "revmatch/aspects.hpp"
#include "revmatch/config.hpp"
#include "revmatch/corpus.hpp"
#include "revmatch/error.hpp"
#include "revmatch/extraction.hpp"
#include "revmatch/feedback.hpp"
#include "revmatch/gateway.hpp"
#include "revmatch/hashing.hpp"
#include "revmatch/http.hpp"
#include "revmatch/http_client.hpp"
#include "revmatch/ingest.hpp"
#include "revmatch/json_util.hpp"
#include "revmatch/matching.hpp"
#include "revmatch/metrics.hpp"
#include "revmatch/pipeline.hpp"
#include "revmatch/platform.hpp"
#include "revmatch/random.hpp"
#include "revmatch/stats.hpp"
#include "revmatch/tokenize.hpp"
#include "revmatch/validation.hpp"
