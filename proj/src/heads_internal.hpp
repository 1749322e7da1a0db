// Copyright 2026 The lowshot Authors
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

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "lowshot/heads.hpp"

namespace lowshot::detail {

std::vector<int> predict_knn(const KnnModel& model, int k, int num_classes,
                             const Eigen::MatrixXd& queries);

ForestModel fit_forest(const Eigen::MatrixXd& x, const std::vector<int>& y, const ForestParams& p,
                       int num_classes, std::uint64_t seed);
std::vector<int> predict_forest(const ForestModel& model, int num_classes,
                                const Eigen::MatrixXd& queries);

double resolve_gamma(const SvmParams& p, const Eigen::MatrixXd& x);
SvmModel fit_svm(const Eigen::MatrixXd& x, const std::vector<int>& y, const SvmParams& p,
                 const std::vector<int>& classes);
std::vector<int> predict_svm(const SvmModel& model, int num_classes,
                             const Eigen::MatrixXd& queries);

}  // namespace lowshot::detail
