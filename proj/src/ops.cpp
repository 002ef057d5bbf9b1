#include "futurelm/ops.hpp"

#include <algorithm>
#include <cmath>

#include "futurelm/errors.hpp"

namespace flm::ops {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
}

void require_same_shape(const char* op, Var a, Var b) {
  require_same_tape(a, b);
  if (!a.value().same_shape(b.value())) shape_error(op, a.value(), b.value());
}

Tensor map_values(const Tensor& x, double (*f)(double)) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluK = 0.044715;

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Tensor out(A.rows(), B.cols());
  out.mat().noalias() = A.mat() * B.mat();
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) t.grad(ia).mat().noalias() += g.mat() * t.value(ib).mat().transpose();
    if (t.needs_grad(ib)) t.grad(ib).mat().noalias() += t.value(ia).mat().transpose() * g.mat();
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols() != B.cols()) shape_error("matmul_nt", A, B);
  Tensor out(A.rows(), B.rows());
  out.mat().noalias() = A.mat() * B.mat().transpose();
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) t.grad(ia).mat().noalias() += g.mat() * t.value(ib).mat();
    if (t.needs_grad(ib)) t.grad(ib).mat().noalias() += g.mat().transpose() * t.value(ia).mat();
  });
}

Var transpose(Var a) {
  const auto& A = a.value();
  Tensor out(A.cols(), A.rows());
  out.mat() = A.mat().transpose();
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    t.grad(ia).mat() += g.mat().transpose();
  });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  out += b.value();
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  const auto& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      const auto& B = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad(ib);
      const auto& A = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, s](Tape& t, const Tensor& g) {
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var mul_scalar(Var a, Var s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) shape_error("mul_scalar", a.value(), s.value());
  const double sv = s.value()[0];
  Tensor out = a.value();
  for (auto& v : out.values()) v *= sv;
  const auto ia = a.id(), is = s.id();
  return a.tape().record(std::move(out), {a, s}, [ia, is](Tape& t, const Tensor& g) {
    const double sv = t.value(is)[0];
    if (t.needs_grad(ia)) {
      auto& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sv * g[i];
    }
    if (t.needs_grad(is)) {
      const auto& A = t.value(ia);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * A[i];
      t.grad(is)[0] += acc;
    }
  });
}

Var add_rowvec(Var a, Var r) {
  require_same_tape(a, r);
  const auto& A = a.value();
  const auto& R = r.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_rowvec", A, R);
  Tensor out = A;
  out.mat().rowwise() += R.mat().row(0);
  const auto ia = a.id(), ir = r.id();
  return a.tape().record(std::move(out), {a, r}, [ia, ir](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) t.grad(ir).mat() += g.mat().colwise().sum();
  });
}

Var mul_rowvec(Var a, Var r) {
  require_same_tape(a, r);
  const auto& A = a.value();
  const auto& R = r.value();
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("mul_rowvec", A, R);
  Tensor out = A;
  out.mat().array().rowwise() *= R.mat().row(0).array();
  const auto ia = a.id(), ir = r.id();
  return a.tape().record(std::move(out), {a, r}, [ia, ir](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      t.grad(ia).mat().array() +=
          g.mat().array().rowwise() * t.value(ir).mat().row(0).array();
    }
    if (t.needs_grad(ir)) {
      t.grad(ir).mat() += (g.mat().array() * t.value(ia).mat().array()).matrix().colwise().sum();
    }
  });
}

Var add_colvec(Var a, Var c) {
  require_same_tape(a, c);
  const auto& A = a.value();
  const auto& C = c.value();
  if (C.cols() != 1 || C.rows() != A.rows()) shape_error("add_colvec", A, C);
  Tensor out = A;
  out.mat().colwise() += C.mat().col(0);
  const auto ia = a.id(), ic = c.id();
  return a.tape().record(std::move(out), {a, c}, [ia, ic](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ic)) t.grad(ic).mat() += g.mat().rowwise().sum();
  });
}

Var sigmoid(Var a) {
  Tensor out = map_values(a.value(), logistic);
  const auto ia = a.id();
  // The output is appended next, so its id is the current node count.
  const auto iy = static_cast<std::uint32_t>(a.tape().node_count());
  return a.tape().record(std::move(out), {a}, [ia, iy](Tape& t, const Tensor& g) {
    auto& ga = t.grad(ia);
    const auto& Y = t.value(iy);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * Y[i] * (1.0 - Y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = map_values(a.value(), [](double x) { return std::tanh(x); });
  const auto ia = a.id();
  const auto iy = static_cast<std::uint32_t>(a.tape().node_count());
  return a.tape().record(std::move(out), {a}, [ia, iy](Tape& t, const Tensor& g) {
    auto& ga = t.grad(ia);
    const auto& Y = t.value(iy);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - Y[i] * Y[i]);
  });
}

Var gelu(Var a) {
  Tensor out = map_values(a.value(), [](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluK * x * x * x)));
  });
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    auto& ga = t.grad(ia);
    const auto& X = t.value(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = X[i];
      const double th = std::tanh(kGeluC * (x + kGeluK * x * x * x));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluK * x * x);
      ga[i] += g[i] * d;
    }
  });
}

Var embedding(Var table, std::span<const TokenId> ids) {
  const auto& T = table.value();
  Tensor out(ids.size(), T.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= T.rows()) {
      throw DimensionError("embedding: id " + std::to_string(ids[r]) +
                           " out of range for table " + T.shape_string());
    }
    std::copy_n(T.row_span(ids[r]).data(), T.cols(), out.row_span(r).data());
  }
  const auto it = table.id();
  std::vector<TokenId> kept(ids.begin(), ids.end());
  return table.tape().record(std::move(out), {table},
                             [it, kept = std::move(kept)](Tape& t, const Tensor& g) {
                               auto& gt = t.grad(it);
                               for (std::size_t r = 0; r < kept.size(); ++r) {
                                 auto dst = gt.row_span(kept[r]);
                                 auto src = g.row_span(r);
                                 for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                               }
                             });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, shift);
  const auto& X = x.value();
  const std::size_t n = X.rows(), c = X.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != c) shape_error("layer_norm", X, gain.value());
  if (shift.value().rows() != 1 || shift.value().cols() != c) {
    shape_error("layer_norm", X, shift.value());
  }
  Tensor xhat(n, c);
  std::vector<double> inv_std(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = X.row_span(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < c; ++k) xhat(r, k) = (row[k] - mean) * inv_std[r];
  }
  Tensor out = xhat;
  out.mat().array().rowwise() *= gain.value().mat().row(0).array();
  out.mat().rowwise() += shift.value().mat().row(0);
  const auto ix = x.id(), ig = gain.id(), is = shift.id();
  return x.tape().record(
      std::move(out), {x, gain, shift},
      [ix, ig, is, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const std::size_t n = g.rows(), c = g.cols();
        if (t.needs_grad(ig)) {
          t.grad(ig).mat() += (g.mat().array() * xhat.mat().array()).matrix().colwise().sum();
        }
        if (t.needs_grad(is)) t.grad(is).mat() += g.mat().colwise().sum();
        if (!t.needs_grad(ix)) return;
        auto& gx = t.grad(ix);
        const auto& G = t.value(ig);
        std::vector<double> dxhat(c);
        for (std::size_t r = 0; r < n; ++r) {
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t k = 0; k < c; ++k) {
            dxhat[k] = g(r, k) * G[k];
            s1 += dxhat[k];
            s2 += dxhat[k] * xhat(r, k);
          }
          const double scale = inv_std[r] / static_cast<double>(c);
          for (std::size_t k = 0; k < c; ++k) {
            gx(r, k) += scale * (static_cast<double>(c) * dxhat[k] - s1 - xhat(r, k) * s2);
          }
        }
      });
}

Var dropout(Var x, double rate, Rng* rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (rng == nullptr || rate == 0.0) return x;
  const auto& X = x.value();
  Tensor mask(X.rows(), X.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng->uniform() >= rate ? keep : 0.0;
  Tensor out(X.rows(), X.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * mask[i];
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, mask = std::move(mask)](Tape& t, const Tensor& g) {
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols of nothing");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.rows() != n) shape_error("concat_cols", parts.front().value(), p.value());
    total += p.cols();
  }
  Tensor out(n, total);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    out.mat().middleCols(off, p.cols()) = p.value().mat();
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  return parts.front().tape().record(
      std::move(out), parts, [ids = std::move(ids), offsets = std::move(offsets)](Tape& t, const Tensor& g) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          auto& gp = t.grad(ids[k]);
          gp.mat() += g.mat().middleCols(offsets[k], gp.cols());
        }
      });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  const auto& X = x.value();
  if (start + count > X.cols() || count == 0) {
    throw DimensionError("slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of range for " + X.shape_string());
  }
  Tensor out(X.rows(), count);
  out.mat() = X.mat().middleCols(start, count);
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, start, count](Tape& t, const Tensor& g) {
    t.grad(ix).mat().middleCols(start, count) += g.mat();
  });
}

Var slice_rows(Var x, std::size_t start, std::size_t count) {
  const auto& X = x.value();
  if (start + count > X.rows() || count == 0) {
    throw DimensionError("slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of range for " + X.shape_string());
  }
  Tensor out(count, X.cols());
  out.mat() = X.mat().middleRows(start, count);
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, start, count](Tape& t, const Tensor& g) {
    t.grad(ix).mat().middleRows(start, count) += g.mat();
  });
}

Var causal_softmax(Var scores) {
  const auto& S = scores.value();
  if (S.rows() > S.cols()) throw DimensionError("causal_softmax needs rows <= cols, got " + S.shape_string());
  Tensor out(S.rows(), S.cols());
  for (std::size_t r = 0; r < S.rows(); ++r) {
    double mx = S(r, 0);
    for (std::size_t c = 1; c <= r; ++c) mx = std::max(mx, S(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c <= r; ++c) {
      out(r, c) = std::exp(S(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c <= r; ++c) out(r, c) /= z;
  }
  const auto is = scores.id();
  Tensor probs = out;
  return scores.tape().record(std::move(out), {scores},
                              [is, probs = std::move(probs)](Tape& t, const Tensor& g) {
                                auto& gs = t.grad(is);
                                for (std::size_t r = 0; r < g.rows(); ++r) {
                                  double dot = 0.0;
                                  for (std::size_t c = 0; c <= r; ++c) dot += g(r, c) * probs(r, c);
                                  for (std::size_t c = 0; c <= r; ++c) {
                                    gs(r, c) += probs(r, c) * (g(r, c) - dot);
                                  }
                                }
                              });
}

Var softmax_cross_entropy(Var logits, std::span<const TokenId> targets) {
  const auto& L = logits.value();
  if (targets.size() != L.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + L.shape_string());
  }
  Tensor probs(L.rows(), L.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < L.rows(); ++r) {
    const auto t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= L.cols()) {
      throw DimensionError("softmax_cross_entropy: target " + std::to_string(t) +
                           " out of range for logits " + L.shape_string());
    }
    const auto lp = log_softmax(L.row_span(r));
    loss -= lp[t];
    for (std::size_t c = 0; c < L.cols(); ++c) probs(r, c) = std::exp(lp[c]);
  }
  const auto il = logits.id();
  std::vector<TokenId> kept(targets.begin(), targets.end());
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [il, probs = std::move(probs), kept = std::move(kept)](Tape& t, const Tensor& g) {
        const double s = g[0];
        auto& gl = t.grad(il);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          for (std::size_t c = 0; c < probs.cols(); ++c) gl(r, c) += s * probs(r, c);
          gl(r, kept[r]) -= s;
        }
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.id();
  return a.tape().record(Tensor::scalar(s), {a}, [ia](Tape& t, const Tensor& g) {
    auto& ga = t.grad(ia);
    for (auto& v : ga.values()) v += g[0];
  });
}

Var rowwise_dot(Var a, Var b) {
  require_same_shape("rowwise_dot", a, b);
  const auto& A = a.value();
  const auto& B = b.value();
  Tensor out(A.rows(), 1);
  out.mat() = (A.mat().array() * B.mat().array()).matrix().rowwise().sum();
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      t.grad(ia).mat().array() += t.value(ib).mat().array().colwise() * g.mat().col(0).array();
    }
    if (t.needs_grad(ib)) {
      t.grad(ib).mat().array() += t.value(ia).mat().array().colwise() * g.mat().col(0).array();
    }
  });
}

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = -INFINITY;
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  for (auto& v : out) v = std::exp(v);
  return out;
}

}  // namespace flm::ops
