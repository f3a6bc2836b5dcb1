#include "mvt/tensor.hpp"

#include <cblas.h>

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <unordered_set>

extern "C" void openblas_set_num_threads(int);

namespace mvt {

namespace {

// Fold-level parallelism owns the cores; BLAS stays single-threaded so runs
// are reproducible regardless of --jobs.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a, lda, b, ldb, beta, c, ldc);
}

std::shared_ptr<TensorNode> make_node(Shape shape) {
  auto n = std::make_shared<TensorNode>();
  size_t count = shape_numel(shape);
  n->shape = std::move(shape);
  n->data.resize(count);
  return n;
}

void ensure_grad(TensorNode& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
}

// Result node for an op: requires_grad and parent edges are recorded only
// when some input participates in a graph.
Tensor op_result(Shape shape, std::initializer_list<Tensor> inputs,
                 std::function<void(const TensorNode&)> backward_fn) {
  auto n = make_node(std::move(shape));
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    n->requires_grad = true;
    for (const auto& t : inputs) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(n));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch: " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

void check_2d(const char* op, const Tensor& t) {
  if (t.ndim() != 2)
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                shape_str(t.shape()));
}

}  // namespace

std::string shape_str(const Shape& s) {
  if (s.empty()) return "scalar";
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
    n *= static_cast<size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = make_node(std::move(shape));
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.node_->data) v = value;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("from_data: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

int Tensor::rows() const {
  if (ndim() != 2) throw std::invalid_argument("rows(): tensor is " + shape_str(shape()));
  return node_->shape[0];
}

int Tensor::cols() const {
  if (ndim() != 2) throw std::invalid_argument("cols(): tensor is " + shape_str(shape()));
  return node_->shape[1];
}

double& Tensor::at(int i, int j) { return node_->data[static_cast<size_t>(i) * cols() + j]; }
double Tensor::at(int i, int j) const { return node_->data[static_cast<size_t>(i) * cols() + j]; }

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

void Tensor::set_requires_grad(bool v) {
  if (v && !node_->parents.empty())
    throw std::logic_error("requires_grad can only be enabled on leaf tensors");
  node_->requires_grad = v;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor has no gradient; call backward() first");
  return node_->grad;
}

std::span<double> Tensor::grad_mut() {
  ensure_grad(*node_);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::clone() const {
  return from_data(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = op_result(a.shape(), {a, b}, [an, bn](const TensorNode& self) {
    if (an->requires_grad) {
      ensure_grad(*an);
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      ensure_grad(*bn);
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
  auto out_data = out.data();
  auto ad = a.data(), bd = b.data();
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = ad[i] + bd[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = op_result(a.shape(), {a, b}, [an, bn](const TensorNode& self) {
    if (an->requires_grad) {
      ensure_grad(*an);
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      ensure_grad(*bn);
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
  auto out_data = out.data();
  auto ad = a.data(), bd = b.data();
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = ad[i] - bd[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  auto an = a.node(), bn = b.node();
  Tensor out = op_result(a.shape(), {a, b}, [an, bn](const TensorNode& self) {
    if (an->requires_grad) {
      ensure_grad(*an);
      for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      ensure_grad(*bn);
      for (size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->data[i];
    }
  });
  auto out_data = out.data();
  auto ad = a.data(), bd = b.data();
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = ad[i] * bd[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  auto an = a.node();
  Tensor out = op_result(a.shape(), {a}, [an, s](const TensorNode& self) {
    ensure_grad(*an);
    for (size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += s * self.grad[i];
  });
  auto out_data = out.data();
  auto ad = a.data();
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = s * ad[i];
  return out;
}

Tensor gelu(const Tensor& x) {
  auto xn = x.node();
  Tensor out = op_result(x.shape(), {x}, [xn](const TensorNode& self) {
    ensure_grad(*xn);
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double v = xn->data[i];
      double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      xn->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
  auto out_data = out.data();
  auto xd = x.data();
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (size_t i = 0; i < out_data.size(); ++i)
    out_data[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * inv_sqrt2));
  return out;
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  check_2d("add_bias_rows", x);
  if (bias.ndim() != 1 || bias.shape()[0] != x.cols())
    throw std::invalid_argument("add_bias_rows: bias " + shape_str(bias.shape()) +
                                " does not match row width of " + shape_str(x.shape()));
  auto xn = x.node(), bn = bias.node();
  int r = x.rows(), c = x.cols();
  Tensor out = op_result(x.shape(), {x, bias}, [xn, bn, r, c](const TensorNode& self) {
    if (xn->requires_grad) {
      ensure_grad(*xn);
      for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      ensure_grad(*bn);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) bn->grad[j] += self.grad[static_cast<size_t>(i) * c + j];
    }
  });
  auto out_data = out.data();
  auto xd = x.data(), bd = bias.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out_data[static_cast<size_t>(i) * c + j] = xd[static_cast<size_t>(i) * c + j] + bd[j];
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d("matmul", a);
  check_2d("matmul", b);
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner extents differ: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  int m = a.rows(), k = a.cols(), n = b.cols();
  auto an = a.node(), bn = b.node();
  Tensor out = op_result({m, n}, {a, b}, [an, bn, m, k, n](const TensorNode& self) {
    if (an->requires_grad) {
      ensure_grad(*an);
      // dA = dC * B^T
      gemm(false, true, m, k, n, self.grad.data(), n, bn->data.data(), n, 1.0, an->grad.data(), k);
    }
    if (bn->requires_grad) {
      ensure_grad(*bn);
      // dB = A^T * dC
      gemm(true, false, k, n, m, an->data.data(), k, self.grad.data(), n, 1.0, bn->grad.data(), n);
    }
  });
  gemm(false, false, m, n, k, a.data().data(), k, b.data().data(), n, 0.0, out.data().data(), n);
  return out;
}

Tensor transpose(const Tensor& a) {
  check_2d("transpose", a);
  int r = a.rows(), c = a.cols();
  auto an = a.node();
  Tensor out = op_result({c, r}, {a}, [an, r, c](const TensorNode& self) {
    ensure_grad(*an);
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < r; ++j)
        an->grad[static_cast<size_t>(j) * c + i] += self.grad[static_cast<size_t>(i) * r + j];
  });
  auto out_data = out.data();
  auto ad = a.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out_data[static_cast<size_t>(j) * r + i] = ad[static_cast<size_t>(i) * c + j];
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  check_2d("softmax_rows", x);
  for (double v : x.data())
    if (!std::isfinite(v)) throw std::invalid_argument("softmax_rows: non-finite input");
  int r = x.rows(), c = x.cols();
  auto xn = x.node();
  Tensor out = op_result(x.shape(), {x}, [xn, r, c](const TensorNode& self) {
    ensure_grad(*xn);
    // dx = y * (dy - sum_j dy_j y_j) per row
    for (int i = 0; i < r; ++i) {
      const double* y = self.data.data() + static_cast<size_t>(i) * c;
      const double* dy = self.grad.data() + static_cast<size_t>(i) * c;
      double* dx = xn->grad.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += dy[j] * y[j];
      for (int j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
  auto out_data = out.data();
  auto xd = x.data();
  for (int i = 0; i < r; ++i) {
    const double* row = xd.data() + static_cast<size_t>(i) * c;
    double* yrow = out_data.data() + static_cast<size_t>(i) * c;
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      yrow[j] = std::exp(row[j] - m);
      s += yrow[j];
    }
    double inv = 1.0 / s;
    for (int j = 0; j < c; ++j) yrow[j] *= inv;
  }
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  check_2d("layer_norm_rows", x);
  int r = x.rows(), c = x.cols();
  if (gamma.ndim() != 1 || gamma.shape()[0] != c || beta.ndim() != 1 || beta.shape()[0] != c)
    throw std::invalid_argument("layer_norm_rows: gamma " + shape_str(gamma.shape()) + ", beta " +
                                shape_str(beta.shape()) + " do not match row width of " +
                                shape_str(x.shape()));
  if (eps <= 0.0) throw std::invalid_argument("layer_norm_rows: eps must be positive");
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();

  // inv_std per row is cheap to recompute in backward; cache it instead.
  auto inv_std = std::make_shared<std::vector<double>>(r);

  Tensor out = op_result(x.shape(), {x, gamma, beta}, [xn, gn, bn, inv_std, r, c](const TensorNode& self) {
    std::vector<double> xhat(c), dxhat(c);
    for (int i = 0; i < r; ++i) {
      const double* xrow = xn->data.data() + static_cast<size_t>(i) * c;
      const double* dy = self.grad.data() + static_cast<size_t>(i) * c;
      double is = (*inv_std)[i];
      double mu = 0.0;
      for (int j = 0; j < c; ++j) mu += xrow[j];
      mu /= c;
      for (int j = 0; j < c; ++j) xhat[j] = (xrow[j] - mu) * is;
      if (gn->requires_grad) {
        ensure_grad(*gn);
        for (int j = 0; j < c; ++j) gn->grad[j] += dy[j] * xhat[j];
      }
      if (bn->requires_grad) {
        ensure_grad(*bn);
        for (int j = 0; j < c; ++j) bn->grad[j] += dy[j];
      }
      if (xn->requires_grad) {
        ensure_grad(*xn);
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
          dxhat[j] = dy[j] * gn->data[j];
          mean_dxhat += dxhat[j];
          mean_dxhat_xhat += dxhat[j] * xhat[j];
        }
        mean_dxhat /= c;
        mean_dxhat_xhat /= c;
        double* dx = xn->grad.data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j)
          dx[j] += is * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
      }
    }
  });

  auto out_data = out.data();
  auto xd = x.data();
  auto gd = gamma.data(), bd = beta.data();
  for (int i = 0; i < r; ++i) {
    const double* xrow = xd.data() + static_cast<size_t>(i) * c;
    double* yrow = out_data.data() + static_cast<size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += xrow[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = xrow[j] - mu;
      var += d * d;
    }
    var /= c;
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < c; ++j) yrow[j] = gd[j] * ((xrow[j] - mu) * is) + bd[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and rearrangements

Tensor sum(const Tensor& x) {
  auto xn = x.node();
  Tensor out = op_result({1}, {x}, [xn](const TensorNode& self) {
    ensure_grad(*xn);
    double g = self.grad[0];
    for (auto& v : xn->grad) v += g;
  });
  double s = 0.0;
  for (double v : x.data()) s += v;
  out.data()[0] = s;
  return out;
}

Tensor mean_rows(const Tensor& x) {
  check_2d("mean_rows", x);
  int r = x.rows(), c = x.cols();
  auto xn = x.node();
  Tensor out = op_result({1, c}, {x}, [xn, r, c](const TensorNode& self) {
    ensure_grad(*xn);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        xn->grad[static_cast<size_t>(i) * c + j] += self.grad[j] / r;
  });
  auto out_data = out.data();
  auto xd = x.data();
  for (int j = 0; j < c; ++j) {
    double s = 0.0;
    for (int i = 0; i < r; ++i) s += xd[static_cast<size_t>(i) * c + j];
    out_data[j] = s / r;
  }
  return out;
}

Tensor logsumexp_all(const Tensor& x) {
  for (double v : x.data())
    if (!std::isfinite(v)) throw std::invalid_argument("logsumexp_all: non-finite input");
  auto xn = x.node();
  Tensor out = op_result({1}, {x}, [xn](const TensorNode& self) {
    ensure_grad(*xn);
    // d lse / dx_i = softmax(x)_i
    double m = xn->data[0];
    for (double v : xn->data) m = std::max(m, v);
    double s = 0.0;
    for (double v : xn->data) s += std::exp(v - m);
    double g = self.grad[0];
    for (size_t i = 0; i < xn->data.size(); ++i)
      xn->grad[i] += g * std::exp(xn->data[i] - m) / s;
  });
  double m = x.data()[0];
  for (double v : x.data()) m = std::max(m, v);
  double s = 0.0;
  for (double v : x.data()) s += std::exp(v - m);
  out.data()[0] = m + std::log(s);
  return out;
}

Tensor pick(const Tensor& x, size_t flat_index) {
  if (flat_index >= x.numel())
    throw std::invalid_argument("pick: index " + std::to_string(flat_index) +
                                " out of range for " + shape_str(x.shape()));
  auto xn = x.node();
  Tensor out = op_result({1}, {x}, [xn, flat_index](const TensorNode& self) {
    ensure_grad(*xn);
    xn->grad[flat_index] += self.grad[0];
  });
  out.data()[0] = x.data()[flat_index];
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(new_shape));
  auto xn = x.node();
  Tensor out = op_result(std::move(new_shape), {x}, [xn](const TensorNode& self) {
    ensure_grad(*xn);
    for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
  auto out_data = out.data();
  auto xd = x.data();
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = xd[i];
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  int c = parts[0].cols();
  int total = 0;
  for (const auto& p : parts) {
    check_2d("concat_rows", p);
    if (p.cols() != c)
      throw std::invalid_argument("concat_rows: column mismatch: " + shape_str(parts[0].shape()) +
                                  " vs " + shape_str(p.shape()));
    total += p.rows();
  }
  auto n = make_node({total, c});
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  std::vector<std::shared_ptr<TensorNode>> srcs;
  for (const auto& p : parts) srcs.push_back(p.node());
  if (needs) {
    n->requires_grad = true;
    n->parents = srcs;
    n->backward_fn = [srcs, c](const TensorNode& self) {
      size_t off = 0;
      for (const auto& s : srcs) {
        size_t len = s->data.size();
        if (s->requires_grad) {
          ensure_grad(*s);
          for (size_t i = 0; i < len; ++i) s->grad[i] += self.grad[off + i];
        }
        off += len;
      }
    };
  }
  size_t off = 0;
  for (const auto& s : srcs) {
    for (size_t i = 0; i < s->data.size(); ++i) n->data[off + i] = s->data[i];
    off += s->data.size();
  }
  return Tensor::wrap(std::move(n));
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  int r = parts[0].rows();
  int total_c = 0;
  for (const auto& p : parts) {
    check_2d("concat_cols", p);
    if (p.rows() != r)
      throw std::invalid_argument("concat_cols: row mismatch: " + shape_str(parts[0].shape()) +
                                  " vs " + shape_str(p.shape()));
    total_c += p.cols();
  }
  auto n = make_node({r, total_c});
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  std::vector<std::shared_ptr<TensorNode>> srcs;
  for (const auto& p : parts) srcs.push_back(p.node());
  if (needs) {
    n->requires_grad = true;
    n->parents = srcs;
    n->backward_fn = [srcs, r, total_c](const TensorNode& self) {
      int col_off = 0;
      for (const auto& s : srcs) {
        int sc = s->shape[1];
        if (s->requires_grad) {
          ensure_grad(*s);
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < sc; ++j)
              s->grad[static_cast<size_t>(i) * sc + j] +=
                  self.grad[static_cast<size_t>(i) * total_c + col_off + j];
        }
        col_off += sc;
      }
    };
  }
  int col_off = 0;
  for (const auto& s : srcs) {
    int sc = s->shape[1];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < sc; ++j)
        n->data[static_cast<size_t>(i) * total_c + col_off + j] =
            s->data[static_cast<size_t>(i) * sc + j];
    col_off += sc;
  }
  return Tensor::wrap(std::move(n));
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  check_2d("slice_rows", x);
  if (r0 < 0 || r1 > x.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: range [" + std::to_string(r0) + ", " +
                                std::to_string(r1) + ") invalid for " + shape_str(x.shape()));
  int c = x.cols();
  auto xn = x.node();
  Tensor out = op_result({r1 - r0, c}, {x}, [xn, r0, c](const TensorNode& self) {
    ensure_grad(*xn);
    size_t base = static_cast<size_t>(r0) * c;
    for (size_t i = 0; i < self.grad.size(); ++i) xn->grad[base + i] += self.grad[i];
  });
  auto out_data = out.data();
  auto xd = x.data();
  size_t base = static_cast<size_t>(r0) * c;
  for (size_t i = 0; i < out_data.size(); ++i) out_data[i] = xd[base + i];
  return out;
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  check_2d("slice_cols", x);
  if (c0 < 0 || c1 > x.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + ", " +
                                std::to_string(c1) + ") invalid for " + shape_str(x.shape()));
  int r = x.rows(), c = x.cols(), w = c1 - c0;
  auto xn = x.node();
  Tensor out = op_result({r, w}, {x}, [xn, r, c, c0, w](const TensorNode& self) {
    ensure_grad(*xn);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < w; ++j)
        xn->grad[static_cast<size_t>(i) * c + c0 + j] += self.grad[static_cast<size_t>(i) * w + j];
  });
  auto out_data = out.data();
  auto xd = x.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < w; ++j)
      out_data[static_cast<size_t>(i) * w + j] = xd[static_cast<size_t>(i) * c + c0 + j];
  return out;
}

Tensor select_rows(const Tensor& x, const std::vector<int>& rows) {
  check_2d("select_rows", x);
  for (int r : rows)
    if (r < 0 || r >= x.rows())
      throw std::invalid_argument("select_rows: row " + std::to_string(r) + " out of range for " +
                                  shape_str(x.shape()));
  int c = x.cols();
  auto xn = x.node();
  auto idx = rows;
  Tensor out = op_result({static_cast<int>(rows.size()), c}, {x}, [xn, idx, c](const TensorNode& self) {
    ensure_grad(*xn);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < c; ++j)
        xn->grad[static_cast<size_t>(idx[i]) * c + j] += self.grad[i * c + j];
  });
  auto out_data = out.data();
  auto xd = x.data();
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < c; ++j)
      out_data[i * c + j] = xd[static_cast<size_t>(idx[i]) * c + j];
  return out;
}

// ---------------------------------------------------------------------------
// Backward sweep

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be a single element, got " +
                                shape_str(loss.shape()));
  TensorNode* root = loss.node().get();
  if (root->backward_ran)
    throw std::logic_error("backward: already called on this loss; rebuild the graph or reset grads");
  root->backward_ran = true;
  if (!root->requires_grad) return;

  // Iterative post-order DFS: parents land before children, so reverse
  // iteration visits the loss first.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited{root};
  std::vector<std::pair<TensorNode*, size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* p = node->parents[next++].get();
      if (visited.insert(p).second && !p->parents.empty()) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  ensure_grad(*root);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace mvt
