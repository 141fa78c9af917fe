// Copyright 2026 The wiconet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Measurements shared by the unit tests and the acceptance binary. Each
// returns the observed error or value; callers own the thresholds.

#pragma once

#include <cstdint>

#include "wiconet/model.hpp"

namespace wiconet::checks {

// Worst |row sum - 1| over cross and self attention maps for `seeds` draws.
double attention_row_sum_error(int seeds);
// max |cross(t, t) - msa(t)| with shared weights, over a few random draws.
double cross_equals_self_error();
// Worst deviation from the loop oracle over all N in {1, 2}, M in {1, 2, 3}
// (outputs and attention weights, double precision).
double attention_oracle_error();

// Relative finite-difference error of each gradient target.
double dual_loss_gradient_error();
double context_block_gradient_error();
// The model used by the end-to-end gradient check, and its parameter count.
ModelConfig gradient_model_config();
double model_gradient_error(int64_t* parameter_count = nullptr);

// Largest |schedule - closed form| over every step of a `total`-step run.
double schedule_error(int64_t total);

// Largest deviation of compute_metrics from the scalar oracle over `trials`
// random confusion matrices (OA, mean F1, mIoU, per-class F1 and IoU).
double metrics_oracle_error(int trials);
// Largest |F1 - 2 IoU / (1 + IoU)| over random binary confusion matrices.
double binary_identity_error(int trials);

// Number of reflect_pad cases that disagree with the mirror oracle (all
// images up to 7x7, all admissible margins), and the number of cases run.
int64_t reflect_mismatches(int64_t* cases = nullptr);
// max |sliding_predict logits - accumulate-and-divide| for an overlapping
// window layout on a random predictor.
double stitching_error();

}  // namespace wiconet::checks
