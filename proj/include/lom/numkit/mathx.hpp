#pragma once

#include <span>
#include <vector>

namespace lom::numkit {

// Max-shifted so that large logits cannot overflow.
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

double log_sum_exp(std::span<const double> values);

double squared_distance(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

}  // namespace lom::numkit
