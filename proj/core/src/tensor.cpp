#include "relcon/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "relcon/errors.hpp"

namespace relcon {

namespace {

using Storage = Tensor::Storage;
using SPtr = std::shared_ptr<Storage>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw std::invalid_argument(std::string(op) + ": undefined tensor");
  }
}

void ensure_grad(Storage& s) {
  if (s.grad.size() != s.data.size()) s.grad.assign(s.data.size(), 0.0);
}

// The unique live tape among inputs, or nullptr when nothing records.
Tape* result_tape(std::initializer_list<const Tensor*> ins, const char* op) {
  Tape* tape = nullptr;
  for (const Tensor* t : ins) {
    Tape* tt = t->storage()->tape;
    if (!tt) continue;
    if (tape && tape != tt) {
      throw std::invalid_argument(std::string(op) +
                                  ": inputs recorded on different tapes");
    }
    tape = tt;
  }
  return tape;
}

SPtr make_output(std::vector<std::size_t> shape, std::vector<double> data,
                 Tape* tape) {
  auto s = std::make_shared<Storage>();
  s->shape = std::move(shape);
  s->data = std::move(data);
  if (tape) {
    s->requires_grad = true;
    s->tape = tape;
  }
  return s;
}

bool grad_ready(const Storage& out) { return !out.grad.empty(); }

void check_finite(const std::vector<double>& v, const char* op,
                  const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericalError(std::string(op) + ": non-finite " + what +
                           " detected");
    }
  }
}

// ---------------------------------------------------------------------------
// Broadcasting
// ---------------------------------------------------------------------------

struct Bcast {
  std::vector<std::size_t> out_shape;
  bool same = false;        // identical shapes
  bool a_scalar = false;    // a has size 1
  bool b_scalar = false;    // b has size 1
  bool row_bcast_b = false; // a [R,C] . b [C]
  bool row_bcast_a = false; // a [C]   . b [R,C]
  bool col_bcast_b = false; // a [R,C] . b [R,1]
  std::size_t rows = 0, cols = 0;
};

Bcast plan_broadcast(const std::vector<std::size_t>& a,
                     const std::vector<std::size_t>& b, const char* op) {
  Bcast p;
  if (a == b) {
    p.out_shape = a;
    p.same = true;
    return p;
  }
  if (shape_product(a) == 1) {
    p.out_shape = b;
    p.a_scalar = true;
    return p;
  }
  if (shape_product(b) == 1) {
    p.out_shape = a;
    p.b_scalar = true;
    return p;
  }
  if (a.size() == 2 && b.size() == 1 && a[1] == b[0]) {
    p.out_shape = a;
    p.row_bcast_b = true;
    p.rows = a[0];
    p.cols = a[1];
    return p;
  }
  if (a.size() == 1 && b.size() == 2 && b[1] == a[0]) {
    p.out_shape = b;
    p.row_bcast_a = true;
    p.rows = b[0];
    p.cols = b[1];
    return p;
  }
  if (a.size() == 2 && b.size() == 2 && a[0] == b[0] && b[1] == 1) {
    p.out_shape = a;
    p.col_bcast_b = true;
    p.rows = a[0];
    p.cols = a[1];
    return p;
  }
  throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) +
                              " and " + shape_str(b) +
                              " are not broadcast-compatible");
}

// fwd(av, bv) -> out; da(g, av, bv) and db(g, av, bv) give the per-element
// gradient contributions for a and b.
template <class Fwd, class Da, class Db>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 Da da, Db db, bool check_out_finite = false) {
  require_defined(a, name);
  require_defined(b, name);
  const Bcast p = plan_broadcast(a.shape(), b.shape(), name);
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = shape_product(p.out_shape);
  std::vector<double> out(n);

  auto b_index = [p](std::size_t i) -> std::size_t {
    if (p.same) return i;
    if (p.b_scalar) return 0;
    if (p.row_bcast_b) return i % p.cols;
    if (p.col_bcast_b) return i / p.cols;
    return i;  // a_scalar / row_bcast_a: b is full-size
  };
  auto a_index = [p](std::size_t i) -> std::size_t {
    if (p.same) return i;
    if (p.a_scalar) return 0;
    if (p.row_bcast_a) return i % p.cols;
    return i;  // b_scalar / row_bcast_b / col_bcast_b: a is full-size
  };

  if (p.same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = fwd(av[a_index(i)], bv[b_index(i)]);
  }
  if (check_out_finite) check_finite(out, name, "result");

  Tape* tape = result_tape({&a, &b}, name);
  SPtr os = make_output(p.out_shape, std::move(out), tape);
  if (tape) {
    SPtr as = a.storage(), bs = b.storage();
    tape->record(
        [os, as, bs, da, db, a_index, b_index]() {
          if (!grad_ready(*os)) return;
          const auto& g = os->grad;
          const std::size_t n2 = g.size();
          if (as->requires_grad) {
            ensure_grad(*as);
            for (std::size_t i = 0; i < n2; ++i) {
              as->grad[a_index(i)] +=
                  da(g[i], as->data[a_index(i)], bs->data[b_index(i)]);
            }
          }
          if (bs->requires_grad) {
            ensure_grad(*bs);
            for (std::size_t i = 0; i < n2; ++i) {
              bs->grad[b_index(i)] +=
                  db(g[i], as->data[a_index(i)], bs->data[b_index(i)]);
            }
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

template <class Fwd, class Dx>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Dx dx) {
  require_defined(a, name);
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);

  Tape* tape = result_tape({&a}, name);
  SPtr os = make_output(a.shape(), std::move(out), tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as, dx]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          const auto& g = os->grad;
          for (std::size_t i = 0; i < g.size(); ++i) {
            as->grad[i] += dx(g[i], as->data[i], os->data[i]);
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

// Shared simplex-projection kernel: writes p = max(z - tau, 0) with tau the
// sort-and-threshold cutoff.
void sparsemax_kernel(const double* z, std::size_t n, double* p,
                      std::vector<double>& scratch) {
  scratch.assign(z, z + n);
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 0; k < n; ++k) {
    cumsum += scratch[k];
    const double kk = static_cast<double>(k + 1);
    if (1.0 + kk * scratch[k] > cumsum) {
      support = k + 1;
      tau = (cumsum - 1.0) / kk;
    } else {
      break;
    }
  }
  (void)support;
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(z[i] - tau, 0.0);
}

void sparsemax_backward_row(const double* p, const double* g, std::size_t n,
                            double* out) {
  double sum = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] > 0.0) {
      sum += g[i];
      ++support;
    }
  }
  const double corr = support ? sum / static_cast<double>(support) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (p[i] > 0.0) ? (g[i] - corr) : 0.0;
  }
}

void softmax_kernel(const double* z, std::size_t n, double tau, double* p) {
  double m = z[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, z[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp((z[i] - m) / tau);
    sum += p[i];
  }
  for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
}

void softmax_backward_row(const double* p, const double* g, std::size_t n,
                          double tau, double* out) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += g[i] * p[i];
  for (std::size_t i = 0; i < n; ++i) out[i] = p[i] * (g[i] - dot) / tau;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
  for (auto d : shape) {
    if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape");
  }
  if (shape_product(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_str(shape) +
                                " does not match data length " +
                                std::to_string(data.size()));
  }
  s_ = std::make_shared<Storage>();
  s_->shape = std::move(shape);
  s_->data = std::move(data);
}

Tensor::Tensor(double scalar) : Tensor({1}, {scalar}) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return full(std::move(shape), 0.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from_storage(std::shared_ptr<Storage> s) {
  Tensor t;
  t.s_ = std::move(s);
  return t;
}

const std::vector<std::size_t>& Tensor::shape() const {
  require_defined(*this, "shape");
  return s_->shape;
}

std::size_t Tensor::ndim() const { return shape().size(); }

std::size_t Tensor::size() const {
  require_defined(*this, "size");
  return s_->data.size();
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& sh = shape();
  if (axis >= sh.size()) throw std::invalid_argument("dim: axis out of range");
  return sh[axis];
}

const std::vector<double>& Tensor::values() const {
  require_defined(*this, "values");
  return s_->data;
}

std::vector<double>& Tensor::mutable_values() {
  require_defined(*this, "mutable_values");
  return s_->data;
}

double Tensor::value() const {
  if (size() != 1) {
    throw std::invalid_argument("value: tensor of size " +
                                std::to_string(size()) + " is not scalar");
  }
  return s_->data[0];
}

double Tensor::at(std::size_t flat_index) const {
  if (flat_index >= size()) throw std::out_of_range("Tensor::at");
  return s_->data[flat_index];
}

bool Tensor::requires_grad() const {
  require_defined(*this, "requires_grad");
  return s_->requires_grad;
}

bool Tensor::has_grad() const {
  require_defined(*this, "has_grad");
  return !s_->grad.empty();
}

const std::vector<double>& Tensor::grad() const {
  require_defined(*this, "grad");
  if (s_->grad.empty()) {
    throw std::logic_error("grad: no gradient present (run backward first)");
  }
  return s_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::~Tape() {
  for (auto& s : touched_) {
    if (s->tape == this) s->tape = nullptr;
  }
}

Tensor Tape::watch(Tensor t) {
  require_defined(t, "watch");
  auto& s = *t.storage();
  if (s.tape && s.tape != this) {
    throw std::invalid_argument("watch: tensor already on another tape");
  }
  s.tape = this;
  s.requires_grad = true;
  ensure_grad(s);
  touched_.push_back(t.storage());
  return t;
}

void Tape::record(std::function<void()> backward_fn,
                  const std::shared_ptr<Tensor::Storage>& out) {
  nodes_.push_back(std::move(backward_fn));
  touched_.push_back(out);
}

void Tape::backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  if (loss.storage()->tape != this) {
    throw std::invalid_argument("backward: loss was not recorded on this tape");
  }
  if (used_) {
    throw std::logic_error(
        "backward: tape already consumed; rebuild the graph for another pass");
  }
  used_ = true;
  auto& ls = *loss.storage();
  ensure_grad(ls);
  ls.grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw std::invalid_argument("matmul: expects 2-D operands, got " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const std::size_t M = a.dim(0), K = a.dim(1), K2 = b.dim(0), N = b.dim(1);
  if (K != K2) {
    throw std::invalid_argument("matmul: inner dimensions differ (" +
                                std::to_string(K) + " vs " +
                                std::to_string(K2) + ")");
  }
  const double* av = a.values().data();
  const double* bv = b.values().data();
  std::vector<double> out(M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double aik = av[i * K + k];
      const double* brow = bv + k * N;
      double* orow = out.data() + i * N;
      for (std::size_t j = 0; j < N; ++j) orow[j] += aik * brow[j];
    }
  }

  Tape* tape = result_tape({&a, &b}, "matmul");
  SPtr os = make_output({M, N}, std::move(out), tape);
  if (tape) {
    SPtr as = a.storage(), bs = b.storage();
    tape->record(
        [os, as, bs, M, K, N]() {
          if (!grad_ready(*os)) return;
          const double* g = os->grad.data();
          if (as->requires_grad) {
            ensure_grad(*as);
            // dA = G . B^T
            const double* bv = bs->data.data();
            for (std::size_t i = 0; i < M; ++i) {
              for (std::size_t j = 0; j < N; ++j) {
                const double gij = g[i * N + j];
                const double* brow = bv + j;  // column j
                double* arow = as->grad.data() + i * K;
                for (std::size_t k = 0; k < K; ++k) {
                  arow[k] += gij * brow[k * N];
                }
              }
            }
          }
          if (bs->requires_grad) {
            ensure_grad(*bs);
            // dB = A^T . G
            const double* av = as->data.data();
            for (std::size_t i = 0; i < M; ++i) {
              for (std::size_t k = 0; k < K; ++k) {
                const double aik = av[i * K + k];
                const double* grow = g + i * N;
                double* brow = bs->grad.data() + k * N;
                for (std::size_t j = 0; j < N; ++j) brow[j] += aik * grow[j];
              }
            }
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  if (a.ndim() != 2) {
    throw std::invalid_argument("transpose: expects 2-D, got " +
                                shape_str(a.shape()));
  }
  const std::size_t R = a.dim(0), C = a.dim(1);
  const auto& av = a.values();
  std::vector<double> out(R * C);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[j * R + i] = av[i * C + j];

  Tape* tape = result_tape({&a}, "transpose");
  SPtr os = make_output({C, R}, std::move(out), tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as, R, C]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          const auto& g = os->grad;
          for (std::size_t j = 0; j < C; ++j)
            for (std::size_t i = 0; i < R; ++i)
              as->grad[i * C + j] += g[j * R + i];
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

Tensor conv1d(const Tensor& input, const Tensor& kernel, int dilation,
              int stride) {
  require_defined(input, "conv1d");
  require_defined(kernel, "conv1d");
  if (input.ndim() != 2) {
    throw std::invalid_argument("conv1d: input must be [T,Cin], got " +
                                shape_str(input.shape()));
  }
  if (kernel.ndim() != 3) {
    throw std::invalid_argument("conv1d: kernel must be [k,Cin,Cout], got " +
                                shape_str(kernel.shape()));
  }
  const std::size_t T = input.dim(0), Cin = input.dim(1);
  const std::size_t k = kernel.dim(0), KCin = kernel.dim(1),
                    Cout = kernel.dim(2);
  if (k % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd, got " +
                      std::to_string(k));
  }
  if (KCin != Cin) {
    throw std::invalid_argument("conv1d: kernel expects " +
                                std::to_string(KCin) + " input channels, got " +
                                std::to_string(Cin));
  }
  if (dilation < 1) throw ConfigError("conv1d: dilation must be >= 1");
  if (stride < 1) throw ConfigError("conv1d: stride must be >= 1");

  const std::ptrdiff_t center = static_cast<std::ptrdiff_t>(k - 1) / 2;
  const std::size_t outT = (T - 1) / static_cast<std::size_t>(stride) + 1;
  const double* in = input.values().data();
  const double* ker = kernel.values().data();
  std::vector<double> out(outT * Cout, 0.0);

  for (std::size_t to = 0; to < outT; ++to) {
    const std::ptrdiff_t tc = static_cast<std::ptrdiff_t>(to) * stride;
    double* orow = out.data() + to * Cout;
    for (std::size_t j = 0; j < k; ++j) {
      const std::ptrdiff_t ti =
          tc + (static_cast<std::ptrdiff_t>(j) - center) * dilation;
      if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
      const double* irow = in + static_cast<std::size_t>(ti) * Cin;
      const double* kslab = ker + j * Cin * Cout;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        const double x = irow[ci];
        const double* krow = kslab + ci * Cout;
        for (std::size_t co = 0; co < Cout; ++co) orow[co] += x * krow[co];
      }
    }
  }

  Tape* tape = result_tape({&input, &kernel}, "conv1d");
  SPtr os = make_output({outT, Cout}, std::move(out), tape);
  if (tape) {
    SPtr is = input.storage(), ks = kernel.storage();
    const int dil = dilation, str = stride;
    tape->record(
        [os, is, ks, T, Cin, k, Cout, center, dil, str]() {
          if (!grad_ready(*os)) return;
          const double* g = os->grad.data();
          const std::size_t outT2 = os->shape[0];
          const bool gi = is->requires_grad, gk = ks->requires_grad;
          if (gi) ensure_grad(*is);
          if (gk) ensure_grad(*ks);
          for (std::size_t to = 0; to < outT2; ++to) {
            const std::ptrdiff_t tc = static_cast<std::ptrdiff_t>(to) * str;
            const double* grow = g + to * Cout;
            for (std::size_t j = 0; j < k; ++j) {
              const std::ptrdiff_t ti =
                  tc + (static_cast<std::ptrdiff_t>(j) - center) * dil;
              if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(T)) continue;
              const std::size_t t = static_cast<std::size_t>(ti);
              const double* kslab = ks->data.data() + j * Cin * Cout;
              const double* irow = is->data.data() + t * Cin;
              for (std::size_t ci = 0; ci < Cin; ++ci) {
                if (gi) {
                  const double* krow = kslab + ci * Cout;
                  double acc = 0.0;
                  for (std::size_t co = 0; co < Cout; ++co)
                    acc += grow[co] * krow[co];
                  is->grad[t * Cin + ci] += acc;
                }
                if (gk) {
                  const double x = irow[ci];
                  double* kgrow = ks->grad.data() + (j * Cin + ci) * Cout;
                  for (std::size_t co = 0; co < Cout; ++co)
                    kgrow[co] += x * grow[co];
                }
              }
            }
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

// ---------------------------------------------------------------------------
// Simplex normalizers
// ---------------------------------------------------------------------------

namespace {

Tensor rowwise_normalizer(const Tensor& logits, std::size_t rows,
                          std::size_t cols, bool use_sparsemax, double tau,
                          const char* name) {
  check_finite(logits.values(), name, "input");
  const double* z = logits.values().data();
  std::vector<double> out(rows * cols);
  std::vector<double> scratch;
  for (std::size_t r = 0; r < rows; ++r) {
    if (use_sparsemax) {
      sparsemax_kernel(z + r * cols, cols, out.data() + r * cols, scratch);
    } else {
      softmax_kernel(z + r * cols, cols, tau, out.data() + r * cols);
    }
  }
  Tape* tape = result_tape({&logits}, name);
  SPtr os = make_output(logits.shape(), std::move(out), tape);
  if (tape) {
    SPtr zs = logits.storage();
    tape->record(
        [os, zs, rows, cols, use_sparsemax, tau]() {
          if (!grad_ready(*os) || !zs->requires_grad) return;
          ensure_grad(*zs);
          std::vector<double> row(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            const double* p = os->data.data() + r * cols;
            const double* g = os->grad.data() + r * cols;
            if (use_sparsemax) {
              sparsemax_backward_row(p, g, cols, row.data());
            } else {
              softmax_backward_row(p, g, cols, tau, row.data());
            }
            double* zg = zs->grad.data() + r * cols;
            for (std::size_t i = 0; i < cols; ++i) zg[i] += row[i];
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

}  // namespace

Tensor sparsemax(const Tensor& logits) {
  require_defined(logits, "sparsemax");
  if (logits.ndim() != 1 || logits.size() == 0) {
    throw std::invalid_argument("sparsemax: expects non-empty 1-D logits");
  }
  return rowwise_normalizer(logits, 1, logits.size(), true, 1.0, "sparsemax");
}

Tensor sparsemax_rows(const Tensor& logits) {
  require_defined(logits, "sparsemax_rows");
  if (logits.ndim() != 2) {
    throw std::invalid_argument("sparsemax_rows: expects 2-D logits");
  }
  return rowwise_normalizer(logits, logits.dim(0), logits.dim(1), true, 1.0,
                            "sparsemax_rows");
}

Tensor softmax(const Tensor& logits, double temperature) {
  require_defined(logits, "softmax");
  if (logits.ndim() != 1 || logits.size() == 0) {
    throw std::invalid_argument("softmax: expects non-empty 1-D logits");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("softmax: temperature must be > 0");
  }
  return rowwise_normalizer(logits, 1, logits.size(), false, temperature,
                            "softmax");
}

Tensor softmax_rows(const Tensor& logits, double temperature) {
  require_defined(logits, "softmax_rows");
  if (logits.ndim() != 2) {
    throw std::invalid_argument("softmax_rows: expects 2-D logits");
  }
  if (!(temperature > 0.0)) {
    throw ConfigError("softmax_rows: temperature must be > 0");
  }
  return rowwise_normalizer(logits, logits.dim(0), logits.dim(1), false,
                            temperature, "softmax_rows");
}

// ---------------------------------------------------------------------------
// Elementwise suite
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); },
      /*check_out_finite=*/true);
}

Tensor add(const Tensor& a, double c) { return add(a, Tensor(c)); }

Tensor mul(const Tensor& a, double c) { return mul(a, Tensor(c)); }

Tensor neg(const Tensor& a) {
  return unary_op(
      a, "neg", [](double x) { return -x; },
      [](double g, double, double) { return -g; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, "square", [](double x) { return x * x; },
      [](double g, double x, double) { return 2.0 * x * g; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values()) {
    if (x < 0.0) throw NumericalError("sqrt: negative input");
  }
  return unary_op(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double g, double, double y) { return 0.5 * g / y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (!(x > 0.0)) throw NumericalError("log: non-positive input");
  }
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

Tensor exp(const Tensor& a) {
  Tensor out = unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
  check_finite(out.values(), "exp", "result");
  return out;
}

Tensor clamp_min(const Tensor& a, double floor) {
  return unary_op(
      a, "clamp_min", [floor](double x) { return x > floor ? x : floor; },
      [floor](double g, double x, double) { return x > floor ? g : 0.0; });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

// Reduce over `axis`: treat the tensor as [outer, n, inner].
Tensor reduce_axis(const Tensor& a, std::size_t axis, bool take_mean,
                   const char* name) {
  require_defined(a, name);
  const auto& sh = a.shape();
  if (axis >= sh.size()) {
    throw std::invalid_argument(std::string(name) + ": axis " +
                                std::to_string(axis) +
                                " out of range for shape " + shape_str(sh));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  const std::size_t n = sh[axis];

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < sh.size(); ++i) {
    if (i != axis) out_shape.push_back(sh[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  const double* av = a.values().data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < n; ++j) {
      const double* row = av + (o * n + j) * inner;
      double* orow = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) orow[i] += row[i];
    }
  }
  const double scale = take_mean ? 1.0 / static_cast<double>(n) : 1.0;
  if (take_mean) {
    for (auto& x : out) x *= scale;
  }

  Tape* tape = result_tape({&a}, name);
  SPtr os = make_output(std::move(out_shape), std::move(out), tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as, outer, n, inner, scale]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          const double* g = os->grad.data();
          for (std::size_t o = 0; o < outer; ++o) {
            const double* grow = g + o * inner;
            for (std::size_t j = 0; j < n; ++j) {
              double* arow = as->grad.data() + (o * n + j) * inner;
              for (std::size_t i = 0; i < inner; ++i)
                arow[i] += grow[i] * scale;
            }
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

Tensor reduce_all(const Tensor& a, bool take_mean, const char* name) {
  require_defined(a, name);
  const auto& av = a.values();
  double acc = 0.0;
  for (double x : av) acc += x;
  const double scale =
      take_mean ? 1.0 / static_cast<double>(av.size()) : 1.0;
  acc *= scale;

  Tape* tape = result_tape({&a}, name);
  SPtr os = make_output({1}, {acc}, tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as, scale]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          const double g = os->grad[0] * scale;
          for (auto& x : as->grad) x += g;
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) {
  return reduce_axis(a, axis, false, "sum");
}

Tensor mean(const Tensor& a, std::size_t axis) {
  return reduce_axis(a, axis, true, "mean");
}

Tensor sum_all(const Tensor& a) { return reduce_all(a, false, "sum_all"); }

Tensor mean_all(const Tensor& a) { return reduce_all(a, true, "mean_all"); }

Tensor l2_norm(const Tensor& a) {
  require_defined(a, "l2_norm");
  const auto& av = a.values();
  double ss = 0.0;
  for (double x : av) ss += x * x;
  const double norm = std::sqrt(ss);

  Tape* tape = result_tape({&a}, "l2_norm");
  SPtr os = make_output({1}, {norm}, tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          const double norm2 = os->data[0];
          if (norm2 == 0.0) return;  // subgradient 0 at the origin
          const double g = os->grad[0] / norm2;
          for (std::size_t i = 0; i < as->data.size(); ++i)
            as->grad[i] += g * as->data[i];
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) {
    throw std::invalid_argument("stack_scalars: empty input");
  }
  std::vector<double> out(scalars.size());
  Tape* tape = nullptr;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require_defined(scalars[i], "stack_scalars");
    if (scalars[i].size() != 1) {
      throw std::invalid_argument("stack_scalars: element " +
                                  std::to_string(i) + " is not scalar");
    }
    out[i] = scalars[i].value();
    Tape* tt = scalars[i].storage()->tape;
    if (tt) {
      if (tape && tape != tt) {
        throw std::invalid_argument(
            "stack_scalars: inputs recorded on different tapes");
      }
      tape = tt;
    }
  }
  SPtr os = make_output({scalars.size()}, std::move(out), tape);
  if (tape) {
    std::vector<SPtr> ins;
    ins.reserve(scalars.size());
    for (const auto& t : scalars) ins.push_back(t.storage());
    tape->record(
        [os, ins]() {
          if (!grad_ready(*os)) return;
          for (std::size_t i = 0; i < ins.size(); ++i) {
            if (!ins[i]->requires_grad) continue;
            ensure_grad(*ins[i]);
            ins[i]->grad[0] += os->grad[i];
          }
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
  require_defined(a, "reshape");
  if (shape_product(new_shape) != a.size()) {
    throw std::invalid_argument("reshape: shape " + shape_str(new_shape) +
                                " does not match size " +
                                std::to_string(a.size()));
  }
  Tape* tape = result_tape({&a}, "reshape");
  SPtr os = make_output(std::move(new_shape), a.values(), tape);
  if (tape) {
    SPtr as = a.storage();
    tape->record(
        [os, as]() {
          if (!grad_ready(*os) || !as->requires_grad) return;
          ensure_grad(*as);
          for (std::size_t i = 0; i < os->grad.size(); ++i)
            as->grad[i] += os->grad[i];
        },
        os);
  }
  return Tensor::from_storage(std::move(os));
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), cfg_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    require_defined(p, "Adam");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto& s = *params_[pi].storage();
    if (!s.grad.empty() && s.grad.size() != s.data.size()) {
      throw std::invalid_argument("Adam: gradient/parameter shape mismatch");
    }
    auto& m = m_[pi];
    auto& v = v_[pi];
    if (m.size() != s.data.size()) {
      throw std::invalid_argument("Adam: state/parameter shape mismatch");
    }
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      const double g = s.grad.empty() ? 0.0 : s.grad[i];
      if (!std::isfinite(g)) {
        throw NumericalError("Adam: non-finite gradient");
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      s.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace relcon
