#include "xglad/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace xglad {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void check_defined(const Tensor& t, const char* who) {
  if (!t.defined()) throw UsageError(std::string(who) + ": undefined tensor");
}

// Recording is needed when a tape is active and any input carries gradients.
bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

// Binary broadcast layout: equal shapes, or b is 1 x cols applied per row.
enum class Cast { none, row };

Cast binary_cast(const Tensor& a, const Tensor& b, const char* who) {
  if (a.same_shape(b)) return Cast::none;
  if (b.rows() == 1 && b.cols() == a.cols()) return Cast::row;
  throw DimensionError(std::string(who) + ": shape mismatch " + shape_str(a) + " vs " +
                       shape_str(b));
}

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

constexpr double kCosineEps = 1e-8;

}  // namespace

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor(int rows, int cols) {
  if (rows < 0 || cols < 0) throw DimensionError("Tensor: negative shape");
  d_ = std::make_shared<Storage>();
  d_->rows = rows;
  d_->cols = cols;
  d_->v.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Tensor::Tensor(int rows, int cols, std::vector<double> values) : Tensor(rows, cols) {
  if (values.size() != d_->v.size())
    throw DimensionError("Tensor: data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(*this));
  d_->v = std::move(values);
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("from_rows: empty");
  Tensor t(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DimensionError("from_rows: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      t.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  }
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

double Tensor::item() const {
  check_defined(*this, "item");
  if (rows() != 1 || cols() != 1)
    throw UsageError("item: tensor is " + shape_str(*this) + ", expected 1x1");
  return d_->v[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  check_defined(*this, "set_requires_grad");
  d_->requires_grad = v;
  if (v && d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), 0.0);
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!requires_grad()) throw UsageError("grad: tensor does not track gradients");
  return d_->g;
}

std::vector<double>& Tensor::grad_ref() const {
  if (!requires_grad()) throw UsageError("grad_ref: tensor does not track gradients");
  return d_->g;
}

void Tensor::zero_grad() {
  if (requires_grad()) d_->g.assign(d_->v.size(), 0.0);
}

bool Tensor::all_finite() const {
  if (!d_) return true;
  for (double x : d_->v)
    if (!std::isfinite(x)) return false;
  return true;
}

// --- Tape ------------------------------------------------------------------

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::function<void()> backward_rule) { ops_.push_back(std::move(backward_rule)); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw UsageError("backward: loss must be a 1x1 scalar");
  if (!loss.requires_grad())
    throw UsageError("backward: loss was not produced by tape-recorded operations");
  Tensor seed = loss;
  seed.grad_ref()[0] = 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

namespace {

// Marks the op output as gradient-carrying and appends its backward rule.
void record(Tensor& out, std::function<void()> rule) {
  out.set_requires_grad(true);
  g_active_tape->record(std::move(rule));
}

}  // namespace

// --- structural ops --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a) + " x " +
                         shape_str(b));
  const int n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(n, m);
  {
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* po = out.values().data();
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < k; ++l) {
        const double av = pa[static_cast<std::size_t>(i) * k + l];
        if (av == 0.0) continue;
        const double* brow = pb + static_cast<std::size_t>(l) * m;
        double* orow = po + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
      }
  }
  if (should_record({&a, &b})) {
    record(out, [a, b, out]() mutable {
      const std::vector<double>& g = out.grad();
      const int n = a.rows(), k = a.cols(), m = b.cols();
      if (a.requires_grad()) {
        std::vector<double>& ga = a.grad_ref();
        const double* pb = b.values().data();
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < k; ++l) {
            double s = 0.0;
            const double* brow = pb + static_cast<std::size_t>(l) * m;
            const double* grow = g.data() + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) s += grow[j] * brow[j];
            ga[static_cast<std::size_t>(i) * k + l] += s;
          }
      }
      if (b.requires_grad()) {
        std::vector<double>& gb = b.grad_ref();
        const double* pa = a.values().data();
        for (int l = 0; l < k; ++l)
          for (int i = 0; i < n; ++i) {
            const double av = pa[static_cast<std::size_t>(i) * k + l];
            if (av == 0.0) continue;
            const double* grow = g.data() + static_cast<std::size_t>(i) * m;
            double* gbrow = gb.data() + static_cast<std::size_t>(l) * m;
            for (int j = 0; j < m; ++j) gbrow[j] += av * grow[j];
          }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check_defined(a, "transpose");
  const int n = a.rows(), m = a.cols();
  Tensor out(m, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out.at(j, i) = a.at(i, j);
  if (should_record({&a})) {
    record(out, [a, out]() mutable {
      std::vector<double>& ga = a.grad_ref();
      const std::vector<double>& g = out.grad();
      const int n = a.rows(), m = a.cols();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          ga[static_cast<std::size_t>(i) * m + j] += g[static_cast<std::size_t>(j) * n + i];
    });
  }
  return out;
}

// --- elementwise binary ----------------------------------------------------

namespace {

template <typename Fwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 // dl/da entry and dl/db entry as functions of (g, av, bv)
                 double (*da)(double, double, double), double (*db)(double, double, double)) {
  check_defined(a, name);
  check_defined(b, name);
  const Cast cast = binary_cast(a, b, name);
  const int n = a.rows(), m = a.cols();
  Tensor out(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double bv = cast == Cast::none ? b.at(i, j) : b.at(0, j);
      out.at(i, j) = fwd(a.at(i, j), bv);
    }
  if (should_record({&a, &b})) {
    record(out, [a, b, out, cast, da, db]() mutable {
      const std::vector<double>& g = out.grad();
      const int n = a.rows(), m = a.cols();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          const std::size_t ij = static_cast<std::size_t>(i) * m + j;
          const std::size_t bj = cast == Cast::none ? ij : static_cast<std::size_t>(j);
          const double av = a.values()[ij];
          const double bv = b.values()[bj];
          if (a.requires_grad()) a.grad_ref()[ij] += da(g[ij], av, bv);
          if (b.requires_grad()) b.grad_ref()[bj] += db(g[ij], av, bv);
        }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double bv) { return g * bv; },
      [](double g, double av, double) { return g * av; });
}

// --- elementwise unary -----------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Bwd bwd_factor) {
  check_defined(a, name);
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = fwd(a.values()[i]);
  if (should_record({&a})) {
    record(out, [a, out, bwd_factor]() mutable {
      const std::vector<double>& g = out.grad();
      std::vector<double>& ga = a.grad_ref();
      for (std::size_t i = 0; i < a.size(); ++i)
        ga[i] += g[i] * bwd_factor(a.values()[i], out.values()[i]);
    });
  }
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor scale(const Tensor& a, double c) {
  return unary_op(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return sigmoid_scalar(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  check_defined(a, "log");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.values()[i] > 0.0))
      throw DomainError("log: non-positive entry " + std::to_string(a.values()[i]) +
                        " at flat index " + std::to_string(i));
  return unary_op(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return sigmoid_scalar(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw UsageError("clamp: lo > hi");
  return unary_op(
      "clamp", a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// --- row / segment ops -----------------------------------------------------

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  check_defined(x, "scale_rows");
  check_defined(s, "scale_rows");
  if (s.rows() != x.rows() || s.cols() != 1)
    throw DimensionError("scale_rows: scaler must be " + std::to_string(x.rows()) +
                         "x1, got " + shape_str(s));
  const int n = x.rows(), m = x.cols();
  Tensor out(n, m);
  for (int i = 0; i < n; ++i) {
    const double si = s.at(i, 0);
    for (int j = 0; j < m; ++j) out.at(i, j) = x.at(i, j) * si;
  }
  if (should_record({&x, &s})) {
    record(out, [x, s, out]() mutable {
      const std::vector<double>& g = out.grad();
      const int n = x.rows(), m = x.cols();
      for (int i = 0; i < n; ++i) {
        const double si = s.values()[i];
        double acc = 0.0;
        for (int j = 0; j < m; ++j) {
          const std::size_t ij = static_cast<std::size_t>(i) * m + j;
          if (x.requires_grad()) x.grad_ref()[ij] += g[ij] * si;
          acc += g[ij] * x.values()[ij];
        }
        if (s.requires_grad()) s.grad_ref()[i] += acc;
      }
    });
  }
  return out;
}

Tensor segment_reduce(const Tensor& x, const std::vector<int>& segments, ReduceMode mode,
                      int num_segments) {
  check_defined(x, "segment_reduce");
  if (static_cast<int>(segments.size()) != x.rows())
    throw DimensionError("segment_reduce: " + std::to_string(segments.size()) +
                         " segment ids for " + std::to_string(x.rows()) + " rows");
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i] < 0 || segments[i] >= num_segments)
      throw IndexError("segment_reduce: segment id " + std::to_string(segments[i]) +
                       " out of range at row " + std::to_string(i));
  const int m = x.cols();
  Tensor out(num_segments, m);
  std::vector<int> counts(static_cast<std::size_t>(num_segments), 0);
  for (int i = 0; i < x.rows(); ++i) {
    const int seg = segments[static_cast<std::size_t>(i)];
    ++counts[static_cast<std::size_t>(seg)];
    for (int j = 0; j < m; ++j) out.at(seg, j) += x.at(i, j);
  }
  if (mode == ReduceMode::mean) {
    for (int sgm = 0; sgm < num_segments; ++sgm) {
      const int c = counts[static_cast<std::size_t>(sgm)];
      if (c > 1)
        for (int j = 0; j < m; ++j) out.at(sgm, j) /= c;
    }
  }
  if (should_record({&x})) {
    record(out, [x, out, segments, counts, mode]() mutable {
      const std::vector<double>& g = out.grad();
      std::vector<double>& gx = x.grad_ref();
      const int m = x.cols();
      for (int i = 0; i < x.rows(); ++i) {
        const int seg = segments[static_cast<std::size_t>(i)];
        const double inv =
            mode == ReduceMode::mean ? 1.0 / counts[static_cast<std::size_t>(seg)] : 1.0;
        for (int j = 0; j < m; ++j)
          gx[static_cast<std::size_t>(i) * m + j] +=
              g[static_cast<std::size_t>(seg) * m + j] * inv;
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& indices) {
  check_defined(x, "gather_rows");
  for (std::size_t k = 0; k < indices.size(); ++k)
    if (indices[k] < 0 || indices[k] >= x.rows())
      throw IndexError("gather_rows: row index " + std::to_string(indices[k]) +
                       " out of range at position " + std::to_string(k));
  const int m = x.cols();
  Tensor out(static_cast<int>(indices.size()), m);
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (int j = 0; j < m; ++j) out.at(static_cast<int>(k), j) = x.at(indices[k], j);
  if (should_record({&x})) {
    record(out, [x, out, indices]() mutable {
      const std::vector<double>& g = out.grad();
      std::vector<double>& gx = x.grad_ref();
      const int m = x.cols();
      for (std::size_t k = 0; k < indices.size(); ++k)
        for (int j = 0; j < m; ++j)
          gx[static_cast<std::size_t>(indices[k]) * m + j] += g[k * m + j];
    });
  }
  return out;
}

Tensor row_sum(const Tensor& x) {
  check_defined(x, "row_sum");
  Tensor out(x.rows(), 1);
  for (int i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < x.cols(); ++j) s += x.at(i, j);
    out.at(i, 0) = s;
  }
  if (should_record({&x})) {
    record(out, [x, out]() mutable {
      const std::vector<double>& g = out.grad();
      std::vector<double>& gx = x.grad_ref();
      const int m = x.cols();
      for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < m; ++j) gx[static_cast<std::size_t>(i) * m + j] += g[i];
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  check_defined(x, "sum_all");
  double s = 0.0;
  for (double v : x.values()) s += v;
  Tensor out(1, 1, {s});
  if (should_record({&x})) {
    record(out, [x, out]() mutable {
      const double g = out.grad()[0];
      std::vector<double>& gx = x.grad_ref();
      for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g;
    });
  }
  return out;
}

// --- cosine ----------------------------------------------------------------

namespace {

void check_vector(const Tensor& t, const char* who) {
  check_defined(t, who);
  if (t.rows() != 1 && t.cols() != 1)
    throw DimensionError(std::string(who) + ": expected a vector, got " + shape_str(t));
}

}  // namespace

Tensor cosine_similarity(const Tensor& a, const Tensor& b, bool strict) {
  check_vector(a, "cosine_similarity");
  check_vector(b, "cosine_similarity");
  if (a.size() != b.size())
    throw DimensionError("cosine_similarity: lengths " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  const double na = vec_norm(a.values());
  const double nb = vec_norm(b.values());
  if (strict && (na == 0.0 || nb == 0.0))
    throw DegenerateInputError("cosine_similarity: zero-norm input in strict mode");
  const double eps = strict ? 0.0 : kCosineEps;
  const double nap = na + eps, nbp = nb + eps;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a.values()[i] * b.values()[i];
  const double c = dot / (nap * nbp);
  Tensor out(1, 1, {c});
  if (should_record({&a, &b})) {
    record(out, [a, b, out, na, nb, nap, nbp, c]() mutable {
      const double g = out.grad()[0];
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.requires_grad()) {
          double d = b.values()[i] / (nap * nbp);
          if (na > 0.0) d -= c * a.values()[i] / (na * nap);
          a.grad_ref()[i] += g * d;
        }
        if (b.requires_grad()) {
          double d = a.values()[i] / (nap * nbp);
          if (nb > 0.0) d -= c * b.values()[i] / (nb * nbp);
          b.grad_ref()[i] += g * d;
        }
      }
    });
  }
  return out;
}

Tensor cosine_matrix(const Tensor& a, const Tensor& b) {
  check_defined(a, "cosine_matrix");
  check_defined(b, "cosine_matrix");
  if (a.cols() != b.cols())
    throw DimensionError("cosine_matrix: feature dims " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()));
  const int r = a.rows(), s = b.rows(), d = a.cols();
  std::vector<double> na(static_cast<std::size_t>(r)), nb(static_cast<std::size_t>(s));
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += a.at(i, j) * a.at(i, j);
    na[static_cast<std::size_t>(i)] = std::sqrt(acc);
  }
  for (int i = 0; i < s; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += b.at(i, j) * b.at(i, j);
    nb[static_cast<std::size_t>(i)] = std::sqrt(acc);
  }
  Tensor out(r, s);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += a.at(i, k) * b.at(j, k);
      out.at(i, j) =
          dot / ((na[static_cast<std::size_t>(i)] + kCosineEps) *
                 (nb[static_cast<std::size_t>(j)] + kCosineEps));
    }
  if (should_record({&a, &b})) {
    record(out, [a, b, out, na, nb]() mutable {
      const std::vector<double>& g = out.grad();
      const int r = a.rows(), s = b.rows(), d = a.cols();
      for (int i = 0; i < r; ++i) {
        const double nap = na[static_cast<std::size_t>(i)] + kCosineEps;
        for (int j = 0; j < s; ++j) {
          const double gij = g[static_cast<std::size_t>(i) * s + j];
          if (gij == 0.0) continue;
          const double nbp = nb[static_cast<std::size_t>(j)] + kCosineEps;
          const double cij = out.values()[static_cast<std::size_t>(i) * s + j];
          for (int k = 0; k < d; ++k) {
            if (a.requires_grad()) {
              double da = b.at(j, k) / (nap * nbp);
              if (na[static_cast<std::size_t>(i)] > 0.0)
                da -= cij * a.at(i, k) / (na[static_cast<std::size_t>(i)] * nap);
              a.grad_ref()[static_cast<std::size_t>(i) * d + k] += gij * da;
            }
            if (b.requires_grad()) {
              double db = a.at(i, k) / (nap * nbp);
              if (nb[static_cast<std::size_t>(j)] > 0.0)
                db -= cij * b.at(j, k) / (nb[static_cast<std::size_t>(j)] * nbp);
              b.grad_ref()[static_cast<std::size_t>(j) * d + k] += gij * db;
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace xglad
