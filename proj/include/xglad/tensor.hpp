#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "xglad/errors.hpp"

namespace xglad {

enum class ReduceMode { sum, mean };

// Dense row-major 2-D tensor of 64-bit floats with reverse-mode autodiff.
//
// A Tensor is a shared handle: copies alias the same storage. Values are
// written by the producing operation and treated as immutable afterwards;
// the gradient buffer is the only state mutated later (by Tape::backward
// and the optimizer).
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols);  // zero-filled
  Tensor(int rows, int cols, std::vector<double> values);

  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  static Tensor scalar(double v);

  bool defined() const { return static_cast<bool>(d_); }
  int rows() const { return d_ ? d_->rows : 0; }
  int cols() const { return d_ ? d_->cols : 0; }
  std::size_t size() const { return d_ ? d_->v.size() : 0; }
  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  const std::vector<double>& values() const { return d_->v; }
  std::vector<double>& values() { return d_->v; }
  double at(int r, int c) const { return d_->v[static_cast<std::size_t>(r) * d_->cols + c]; }
  double& at(int r, int c) { return d_->v[static_cast<std::size_t>(r) * d_->cols + c]; }

  // Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return d_ && d_->requires_grad; }
  Tensor& set_requires_grad(bool v);
  const std::vector<double>& grad() const;
  // Mutable gradient buffer. Const-qualified on purpose: a Tensor is a
  // shared handle and the gradient buffer is its designated mutable state.
  std::vector<double>& grad_ref() const;
  void zero_grad();

  bool all_finite() const;

  // Identity comparison (same storage), used by tests.
  bool same_storage(const Tensor& o) const { return d_ == o.d_; }

 private:
  struct Storage {
    int rows = 0, cols = 0;
    std::vector<double> v;
    std::vector<double> g;  // allocated iff requires_grad
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> d_;
};

// Define-by-run gradient tape. Constructing a Tape makes it the active tape
// for the current thread; operations executed while it is active append a
// backward rule per recorded op. backward() replays the rules in reverse
// recorded order, which accumulates gradients for every requires_grad input
// exactly once per use. The tape is rebuilt each forward pass and confined,
// together with its tensors, to one thread.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Seeds d(loss)/d(loss) = 1 and replays all recorded ops in reverse.
  // loss must be a 1x1 tensor produced while this tape was active.
  void backward(const Tensor& loss);

  std::size_t num_ops() const { return ops_.size(); }

  static Tape* active();

  void record(std::function<void()> backward_rule);

 private:
  std::vector<std::function<void()>> ops_;
  Tape* prev_ = nullptr;
};

// --- operations -----------------------------------------------------------
// Binary elementwise ops accept equal shapes or a 1 x cols right operand
// broadcast over rows (bias-style). Each op installs the matching backward
// rule when a tape is active and some input requires gradients.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // requires strictly positive entries
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// out[i] = x[i] * s[i]; s is a column vector (x.rows x 1). Differentiable in
// both arguments; this is the row-wise product used for feature masking.
Tensor scale_rows(const Tensor& x, const Tensor& s);

// Row i of the output is the sum (or mean) of x-rows whose segment id is i.
// Empty segments yield zero rows.
Tensor segment_reduce(const Tensor& x, const std::vector<int>& segments, ReduceMode mode,
                      int num_segments);

// out[k] = x[indices[k]].
Tensor gather_rows(const Tensor& x, const std::vector<int>& indices);

Tensor row_sum(const Tensor& x);  // n x c -> n x 1
Tensor sum_all(const Tensor& x);  // n x c -> 1 x 1

// dot(a,b) / (|a| * |b|) for two vectors of equal length (row or column).
// By default each norm is padded with eps = 1e-8 so zero vectors yield 0
// instead of erroring mid-training; strict mode errors on a zero norm.
Tensor cosine_similarity(const Tensor& a, const Tensor& b, bool strict = false);

// Pairwise cosine of the rows of a (R x D) and b (S x D) -> R x S.
Tensor cosine_matrix(const Tensor& a, const Tensor& b);

}  // namespace xglad
