#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace megclass {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Cosine similarity. Throws NumericalError if either vector has zero norm.
double cosine(const Vec& a, const Vec& b);

// Same as cosine() but returns 0 for zero-norm inputs.
double cosine_or_zero(const Vec& a, const Vec& b);

bool all_finite(const Vec& v);

// Index of the largest entry; ties resolve to the lowest index.
int argmax_lowest(std::span<const double> values);

// Runs fn(i) for i in [0, n) over `threads` workers using static chunking.
// Work items must write to disjoint outputs.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace megclass
