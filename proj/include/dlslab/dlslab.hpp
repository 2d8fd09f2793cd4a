// Copyright 2026 The dlslab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "dlslab/core.hpp"
#include "dlslab/error.hpp"
#include "dlslab/experiment.hpp"
#include "dlslab/measurement.hpp"
#include "dlslab/metrics.hpp"
#include "dlslab/runtime.hpp"
#include "dlslab/schedulers.hpp"
#include "dlslab/simulator.hpp"
#include "dlslab/trace.hpp"
#include "dlslab/workloads.hpp"
