// Copyright 2026 The Credit Loom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Everything except the HTTP client (creditloom/http_gateway.hpp) and the
// command line (creditloom/cli.hpp), which pull in cpp-httplib and CLI11.

#include "creditloom/answer.hpp"
#include "creditloom/bcd_optimizer.hpp"
#include "creditloom/config.hpp"
#include "creditloom/credit_ledger.hpp"
#include "creditloom/critic.hpp"
#include "creditloom/datastore.hpp"
#include "creditloom/digest.hpp"
#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"
#include "creditloom/labels.hpp"
#include "creditloom/prompt_assets.hpp"
#include "creditloom/protocol.hpp"
#include "creditloom/replay_cache.hpp"
#include "creditloom/report.hpp"
#include "creditloom/rng.hpp"
#include "creditloom/synthetic.hpp"
#include "creditloom/task.hpp"
