/*
 * Copyright 2026 The umix Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "umix/errors.hpp"
#include "umix/tensor.hpp"
#include "umix/autodiff.hpp"
#include "umix/nn.hpp"
#include "umix/config.hpp"
#include "umix/encoder.hpp"
#include "umix/decoder.hpp"
#include "umix/model.hpp"
#include "umix/analysis.hpp"
#include "umix/data.hpp"
#include "umix/metrics.hpp"
#include "umix/train.hpp"
#include "umix/checkpoint.hpp"
#include "umix/gradcheck.hpp"
#include "umix/ablation.hpp"
