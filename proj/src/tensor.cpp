#include "livecast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace livecast::tensor {

namespace {

thread_local bool mac_counter_active = false;
thread_local std::int64_t mac_counter_value = 0;

void count_macs(std::int64_t n) {
  if (mac_counter_active) mac_counter_value += n;
}

void ensure_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value in result");
  }
}

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->traced()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw Error(std::string(op) + ": inputs belong to different tapes");
    }
  }
  return tape;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int shape_size(const Shape& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw DimensionError("shape " + shape_str(s) + " has non-positive dim");
    n *= d;
  }
  return n;
}

MacCounterGuard::MacCounterGuard() : saved_(mac_counter_value), was_active_(mac_counter_active) {
  mac_counter_active = true;
  mac_counter_value = 0;
}

MacCounterGuard::~MacCounterGuard() {
  mac_counter_active = was_active_;
  mac_counter_value = was_active_ ? saved_ + mac_counter_value : saved_;
}

std::int64_t MacCounterGuard::count() const { return mac_counter_value; }

// --- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
  int n = shape_size(shape);
  return Tensor(std::move(shape), std::make_shared<const std::vector<double>>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  int n = shape_size(shape);
  return Tensor(std::move(shape), std::make_shared<const std::vector<double>>(n, value));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  int n = shape_size(shape);
  if (n != static_cast<int>(values.size()))
    throw DimensionError("from_values: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  return Tensor(std::move(shape), std::make_shared<const std::vector<double>>(std::move(values)));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

double Tensor::at(std::initializer_list<int> idx) const {
  if (idx.size() != shape_.size()) throw DimensionError("at: rank mismatch");
  int flat = 0;
  auto it = idx.begin();
  for (size_t d = 0; d < shape_.size(); ++d, ++it) {
    if (*it < 0 || *it >= shape_[d]) throw DimensionError("at: index out of range");
    flat = flat * shape_[d] + *it;
  }
  return (*data_)[flat];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item: tensor has " + std::to_string(size()) + " elements");
  return (*data_)[0];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

// --- Tape -------------------------------------------------------------------

// Central node-recording hook shared by all ops.
Tensor record_op(Tape* tape, Tensor out, std::vector<int> parents,
                 std::function<void(const std::vector<double>&, Tape&)> pull) {
  if (tape == nullptr) return out;
  Tape::Node node;
  node.parents = std::move(parents);
  node.size = out.size();
  node.pull = std::move(pull);
  tape->nodes_.push_back(std::move(node));
  out.tape_ = tape;
  out.node_ = static_cast<int>(tape->nodes_.size()) - 1;
  return out;
}

struct TapeAccess {
  static std::vector<double>& grad(Tape& tape, int node) { return tape.grad_buffer(node); }
};

namespace {
// Accumulate helper used by op pull lambdas.
inline void axpy(std::vector<double>& dst, const std::vector<double>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}
}  // namespace

Tensor Tape::watch(const Tensor& t) {
  if (!t.defined()) throw Error("watch: undefined tensor");
  Tensor leaf = t.detached();
  return record_op(this, std::move(leaf), {}, [](const std::vector<double>&, Tape&) {});
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw Error("backward: loss not traced on this tape");
  if (loss.size() != 1) throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  const int root = loss.node();

  // Mark nodes reachable from the root through parent links.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<int> stack{root};
  reachable[root] = 1;
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (int p : nodes_[id].parents) {
      if (!reachable[p]) {
        reachable[p] = 1;
        stack.push_back(p);
      }
    }
  }

  grads_.assign(nodes_.size(), {});
  for (size_t i = 0; i < nodes_.size(); ++i) grads_[i].assign(nodes_[i].size, 0.0);
  grads_[root][0] = 1.0;

  // Ids are a topological order, so one reverse sweep visits each node once
  // with its output gradient complete.
  for (int id = root; id >= 0; --id) {
    if (!reachable[id]) continue;
    nodes_[id].pull(grads_[id], *this);
  }
  backward_done_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
  if (t.tape() != this) throw Error("grad: tensor not traced on this tape");
  if (!backward_done_) throw Error("grad: backward has not run");
  return Tensor::from_values(t.shape(), grads_[t.node()]);
}

// --- ops ---------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tape* tape = common_tape("add", {&a, &b});
  std::vector<double> out(a.size());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  ensure_finite("add", out);
  Tensor result = Tensor::from_values(a.shape(), std::move(out));
  if (!tape) return result;
  std::vector<int> parents;
  int pa = a.traced() ? a.node() : -1, pb = b.traced() ? b.node() : -1;
  if (pa >= 0) parents.push_back(pa);
  if (pb >= 0) parents.push_back(pb);
  return record_op(tape, std::move(result), std::move(parents), [pa, pb](const std::vector<double>& g, Tape& t) {
    if (pa >= 0) axpy(TapeAccess::grad(t, pa), g);
    if (pb >= 0) axpy(TapeAccess::grad(t, pb), g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tape* tape = common_tape("sub", {&a, &b});
  std::vector<double> out(a.size());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  ensure_finite("sub", out);
  Tensor result = Tensor::from_values(a.shape(), std::move(out));
  if (!tape) return result;
  std::vector<int> parents;
  int pa = a.traced() ? a.node() : -1, pb = b.traced() ? b.node() : -1;
  if (pa >= 0) parents.push_back(pa);
  if (pb >= 0) parents.push_back(pb);
  return record_op(tape, std::move(result), std::move(parents), [pa, pb](const std::vector<double>& g, Tape& t) {
    if (pa >= 0) axpy(TapeAccess::grad(t, pa), g);
    if (pb >= 0) {
      auto& gb = TapeAccess::grad(t, pb);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw DimensionError("hadamard: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tape* tape = common_tape("hadamard", {&a, &b});
  count_macs(a.size());
  std::vector<double> out(a.size());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  ensure_finite("hadamard", out);
  Tensor result = Tensor::from_values(a.shape(), std::move(out));
  if (!tape) return result;
  int pa = a.traced() ? a.node() : -1, pb = b.traced() ? b.node() : -1;
  std::vector<int> parents;
  if (pa >= 0) parents.push_back(pa);
  if (pb >= 0) parents.push_back(pb);
  auto da = std::make_shared<std::vector<double>>(a.values());
  auto db = std::make_shared<std::vector<double>>(b.values());
  return record_op(tape, std::move(result), std::move(parents),
                   [pa, pb, da, db](const std::vector<double>& g, Tape& t) {
                     if (pa >= 0) {
                       auto& ga = TapeAccess::grad(t, pa);
                       for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (*db)[i];
                     }
                     if (pb >= 0) {
                       auto& gb = TapeAccess::grad(t, pb);
                       for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * (*da)[i];
                     }
                   });
}

Tensor scale(const Tensor& a, double factor) {
  if (!std::isfinite(factor)) throw NumericError("scale: non-finite factor");
  Tape* tape = common_tape("scale", {&a});
  std::vector<double> out(a.size());
  for (int i = 0; i < a.size(); ++i) out[i] = a[i] * factor;
  ensure_finite("scale", out);
  Tensor result = Tensor::from_values(a.shape(), std::move(out));
  if (!tape) return result;
  int pa = a.node();
  return record_op(tape, std::move(result), {pa}, [pa, factor](const std::vector<double>& g, Tape& t) {
    auto& ga = TapeAccess::grad(t, pa);
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2) throw DimensionError("matmul: left operand must be rank 2, got " + shape_str(a.shape()));
  const bool vec_rhs = b.shape().size() == 1;
  if (!vec_rhs && b.shape().size() != 2)
    throw DimensionError("matmul: right operand must be rank 1 or 2, got " + shape_str(b.shape()));
  const int m = a.shape()[0];
  const int k = a.shape()[1];
  const int bk = b.shape()[0];
  const int n = vec_rhs ? 1 : b.shape()[1];
  if (k != bk)
    throw DimensionError("matmul: inner dims differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tape* tape = common_tape("matmul", {&a, &b});
  count_macs(static_cast<std::int64_t>(m) * n * k);

  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double aik = av[static_cast<size_t>(i) * k + kk];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + static_cast<size_t>(kk) * n;
      double* orow = out.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  ensure_finite("matmul", out);
  Shape out_shape = vec_rhs ? Shape{m} : Shape{m, n};
  Tensor result = Tensor::from_values(std::move(out_shape), std::move(out));
  if (!tape) return result;

  int pa = a.traced() ? a.node() : -1, pb = b.traced() ? b.node() : -1;
  std::vector<int> parents;
  if (pa >= 0) parents.push_back(pa);
  if (pb >= 0) parents.push_back(pb);
  auto da = std::make_shared<std::vector<double>>(a.values());
  auto db = std::make_shared<std::vector<double>>(b.values());
  return record_op(tape, std::move(result), std::move(parents),
                   [pa, pb, da, db, m, n, k](const std::vector<double>& g, Tape& t) {
                     if (pa >= 0) {
                       // dA = g . B^T
                       auto& ga = TapeAccess::grad(t, pa);
                       for (int i = 0; i < m; ++i)
                         for (int kk = 0; kk < k; ++kk) {
                           double s = 0.0;
                           for (int j = 0; j < n; ++j)
                             s += g[static_cast<size_t>(i) * n + j] * (*db)[static_cast<size_t>(kk) * n + j];
                           ga[static_cast<size_t>(i) * k + kk] += s;
                         }
                     }
                     if (pb >= 0) {
                       // dB = A^T . g
                       auto& gb = TapeAccess::grad(t, pb);
                       for (int kk = 0; kk < k; ++kk)
                         for (int j = 0; j < n; ++j) {
                           double s = 0.0;
                           for (int i = 0; i < m; ++i)
                             s += (*da)[static_cast<size_t>(i) * k + kk] * g[static_cast<size_t>(i) * n + j];
                           gb[static_cast<size_t>(kk) * n + j] += s;
                         }
                     }
                   });
}

Tensor conv2d_same(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (x.shape().size() != 3) throw DimensionError("conv2d_same: input must be [c,H,W], got " + shape_str(x.shape()));
  if (kernel.shape().size() != 4)
    throw DimensionError("conv2d_same: kernel must be [co,ci,k,k], got " + shape_str(kernel.shape()));
  const int ci = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int co = kernel.shape()[0], kci = kernel.shape()[1], kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (kci != ci) throw DimensionError("conv2d_same: kernel expects " + std::to_string(kci) + " input channels, input has " + std::to_string(ci));
  if (kh != kw || kh % 2 == 0) throw DimensionError("conv2d_same: kernel must be square with odd size");
  if (bias.shape() != Shape{co})
    throw DimensionError("conv2d_same: bias must be [" + std::to_string(co) + "], got " + shape_str(bias.shape()));
  Tape* tape = common_tape("conv2d_same", {&x, &kernel, &bias});
  const int K = kh, P = K / 2;
  count_macs(static_cast<std::int64_t>(H) * W * K * K * ci * co);

  const auto& xv = x.values();
  const auto& kv = kernel.values();
  const auto& bv = bias.values();
  std::vector<double> out(static_cast<size_t>(co) * H * W);
  for (int oc = 0; oc < co; ++oc) {
    double* oplane = out.data() + static_cast<size_t>(oc) * H * W;
    for (int i = 0; i < H * W; ++i) oplane[i] = bv[oc];
    for (int c = 0; c < ci; ++c) {
      const double* xplane = xv.data() + static_cast<size_t>(c) * H * W;
      const double* kpatch = kv.data() + (static_cast<size_t>(oc) * ci + c) * K * K;
      for (int dy = 0; dy < K; ++dy) {
        for (int dx = 0; dx < K; ++dx) {
          const double w = kpatch[dy * K + dx];
          if (w == 0.0) continue;
          const int y0 = std::max(0, P - dy), y1 = std::min(H, H + P - dy);
          const int x0 = std::max(0, P - dx), x1 = std::min(W, W + P - dx);
          for (int y = y0; y < y1; ++y) {
            const double* xrow = xplane + static_cast<size_t>(y + dy - P) * W + (dx - P);
            double* orow = oplane + static_cast<size_t>(y) * W;
            for (int xx = x0; xx < x1; ++xx) orow[xx] += w * xrow[xx];
          }
        }
      }
    }
  }
  ensure_finite("conv2d_same", out);
  Tensor result = Tensor::from_values({co, H, W}, std::move(out));
  if (!tape) return result;

  int px = x.traced() ? x.node() : -1;
  int pk = kernel.traced() ? kernel.node() : -1;
  int pb = bias.traced() ? bias.node() : -1;
  std::vector<int> parents;
  for (int p : {px, pk, pb})
    if (p >= 0) parents.push_back(p);
  auto dx_ = std::make_shared<std::vector<double>>(x.values());
  auto dk_ = std::make_shared<std::vector<double>>(kernel.values());
  return record_op(
      tape, std::move(result), std::move(parents),
      [px, pk, pb, dx_, dk_, ci, co, H, W, K, P](const std::vector<double>& g, Tape& t) {
        if (pb >= 0) {
          auto& gb = TapeAccess::grad(t, pb);
          for (int oc = 0; oc < co; ++oc) {
            double s = 0.0;
            const double* gplane = g.data() + static_cast<size_t>(oc) * H * W;
            for (int i = 0; i < H * W; ++i) s += gplane[i];
            gb[oc] += s;
          }
        }
        if (pk >= 0) {
          auto& gk = TapeAccess::grad(t, pk);
          for (int oc = 0; oc < co; ++oc) {
            const double* gplane = g.data() + static_cast<size_t>(oc) * H * W;
            for (int c = 0; c < ci; ++c) {
              const double* xplane = dx_->data() + static_cast<size_t>(c) * H * W;
              double* kpatch = gk.data() + (static_cast<size_t>(oc) * ci + c) * K * K;
              for (int dy = 0; dy < K; ++dy)
                for (int dx = 0; dx < K; ++dx) {
                  double s = 0.0;
                  const int y0 = std::max(0, P - dy), y1 = std::min(H, H + P - dy);
                  const int x0 = std::max(0, P - dx), x1 = std::min(W, W + P - dx);
                  for (int y = y0; y < y1; ++y) {
                    const double* xrow = xplane + static_cast<size_t>(y + dy - P) * W + (dx - P);
                    const double* grow = gplane + static_cast<size_t>(y) * W;
                    for (int xx = x0; xx < x1; ++xx) s += grow[xx] * xrow[xx];
                  }
                  kpatch[dy * K + dx] += s;
                }
            }
          }
        }
        if (px >= 0) {
          auto& gx = TapeAccess::grad(t, px);
          for (int oc = 0; oc < co; ++oc) {
            const double* gplane = g.data() + static_cast<size_t>(oc) * H * W;
            for (int c = 0; c < ci; ++c) {
              double* xgplane = gx.data() + static_cast<size_t>(c) * H * W;
              const double* kpatch = dk_->data() + (static_cast<size_t>(oc) * ci + c) * K * K;
              for (int dy = 0; dy < K; ++dy)
                for (int dx = 0; dx < K; ++dx) {
                  const double w = kpatch[dy * K + dx];
                  if (w == 0.0) continue;
                  const int y0 = std::max(0, P - dy), y1 = std::min(H, H + P - dy);
                  const int x0 = std::max(0, P - dx), x1 = std::min(W, W + P - dx);
                  for (int y = y0; y < y1; ++y) {
                    double* xgrow = xgplane + static_cast<size_t>(y + dy - P) * W + (dx - P);
                    const double* grow = gplane + static_cast<size_t>(y) * W;
                    for (int xx = x0; xx < x1; ++xx) xgrow[xx] += w * grow[xx];
                  }
                }
            }
          }
        }
      });
}

Tensor elementwise(const Tensor& x, Act f) {
  Tape* tape = common_tape("elementwise", {&x});
  std::vector<double> out(x.size());
  switch (f) {
    case Act::sigmoid:
      for (int i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
      break;
    case Act::tanh:
      for (int i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Act::relu:
      for (int i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
  }
  ensure_finite("elementwise", out);
  Tensor result = Tensor::from_values(x.shape(), std::move(out));
  if (!tape) return result;
  int px = x.node();
  auto dx = std::make_shared<std::vector<double>>(x.values());
  auto dy = std::make_shared<std::vector<double>>(result.values());
  return record_op(tape, std::move(result), {px}, [px, f, dx, dy](const std::vector<double>& g, Tape& t) {
    auto& gx = TapeAccess::grad(t, px);
    switch (f) {
      case Act::sigmoid:
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (*dy)[i] * (1.0 - (*dy)[i]);
        break;
      case Act::tanh:
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (1.0 - (*dy)[i] * (*dy)[i]);
        break;
      case Act::relu:
        for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*dx)[i] > 0.0 ? g[i] : 0.0;
        break;
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const size_t rank = parts[0].shape().size();
  if (rank != 1 && rank != 3) throw DimensionError("concat: only rank 1 or 3 supported");
  int axis0 = 0;
  for (const Tensor& p : parts) {
    if (p.shape().size() != rank) throw DimensionError("concat: rank mismatch");
    if (rank == 3 && (p.shape()[1] != parts[0].shape()[1] || p.shape()[2] != parts[0].shape()[2]))
      throw DimensionError("concat: spatial dims mismatch");
    axis0 += p.shape()[0];
  }
  std::vector<const Tensor*> ptrs;
  for (const Tensor& p : parts) ptrs.push_back(&p);
  Tape* tape = nullptr;
  for (const Tensor* p : ptrs) {
    if (p->traced()) {
      if (tape && tape != p->tape()) throw Error("concat: inputs belong to different tapes");
      tape = p->tape();
    }
  }
  Shape out_shape = parts[0].shape();
  out_shape[0] = axis0;
  std::vector<double> out;
  out.reserve(shape_size(out_shape));
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  Tensor result = Tensor::from_values(std::move(out_shape), std::move(out));
  if (!tape) return result;
  struct Piece {
    int node;
    size_t offset;
    size_t size;
  };
  auto pieces = std::make_shared<std::vector<Piece>>();
  size_t offset = 0;
  std::vector<int> parents;
  for (const Tensor& p : parts) {
    if (p.traced()) {
      pieces->push_back({p.node(), offset, static_cast<size_t>(p.size())});
      parents.push_back(p.node());
    }
    offset += static_cast<size_t>(p.size());
  }
  return record_op(tape, std::move(result), std::move(parents), [pieces](const std::vector<double>& g, Tape& t) {
    for (const auto& piece : *pieces) {
      auto& gp = TapeAccess::grad(t, piece.node);
      for (size_t i = 0; i < piece.size; ++i) gp[i] += g[piece.offset + i];
    }
  });
}

Tensor sum(const Tensor& x) {
  Tape* tape = common_tape("sum", {&x});
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) s += x[i];
  if (!std::isfinite(s)) throw NumericError("sum: non-finite value in result");
  Tensor result = Tensor::scalar(s);
  if (!tape) return result;
  int px = x.node();
  return record_op(tape, std::move(result), {px}, [px](const std::vector<double>& g, Tape& t) {
    auto& gx = TapeAccess::grad(t, px);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.shape().size() != 3) throw DimensionError("global_avg_pool: input must be [c,H,W], got " + shape_str(x.shape()));
  const int c = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  Tape* tape = common_tape("global_avg_pool", {&x});
  const double inv = 1.0 / (H * W);
  std::vector<double> out(c, 0.0);
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    const double* plane = x.values().data() + static_cast<size_t>(ch) * H * W;
    for (int i = 0; i < H * W; ++i) s += plane[i];
    out[ch] = s * inv;
  }
  ensure_finite("global_avg_pool", out);
  Tensor result = Tensor::from_values({c}, std::move(out));
  if (!tape) return result;
  int px = x.node();
  return record_op(tape, std::move(result), {px}, [px, c, H, W, inv](const std::vector<double>& g, Tape& t) {
    auto& gx = TapeAccess::grad(t, px);
    for (int ch = 0; ch < c; ++ch) {
      const double gv = g[ch] * inv;
      double* plane = gx.data() + static_cast<size_t>(ch) * H * W;
      for (int i = 0; i < H * W; ++i) plane[i] += gv;
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  Tape* tape = common_tape("reshape", {&x});
  Tensor result = Tensor::from_values(std::move(shape), x.values());
  if (!tape) return result;
  int px = x.node();
  return record_op(tape, std::move(result), {px}, [px](const std::vector<double>& g, Tape& t) {
    axpy(TapeAccess::grad(t, px), g);
  });
}

}  // namespace livecast::tensor
