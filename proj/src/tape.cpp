#include "stzitd/tape.hpp"

#include <cmath>
#include <utility>

#include "stzitd/errors.hpp"

namespace stzitd {

ValueId Tape::push(Tensor out, const std::string& op, std::function<void()> back) {
  out.ensure_finite(op);
  vals_.push_back(std::move(out));
  back_.push_back(std::move(back));
  return vals_.size() - 1;
}

ValueId Tape::input(Tensor t) {
  t.ensure_finite("input");
  vals_.push_back(std::move(t));
  back_.push_back(nullptr);
  return vals_.size() - 1;
}

const Tensor& Tape::grad(ValueId id) const {
  if (!has_grads_) throw ContractError("grad(): backward() has not run");
  return grads_[id];
}

ValueId Tape::unary(ValueId x, Unary fn, double arg) {
  const Tensor& in = vals_[x];
  Tensor out{in.shape()};
  const char* name = "unary";
  switch (fn) {
    case Unary::Sigmoid:
      name = "sigmoid";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-in[i]));
      break;
    case Unary::Tanh:
      name = "tanh";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Unary::Relu:
      name = "relu";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Unary::LeakyRelu:
      name = "leaky_relu";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > 0.0 ? in[i] : arg * in[i];
      break;
    case Unary::Exp:
      name = "exp";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::exp(in[i]);
      break;
    case Unary::Log:
      name = "log";
      for (std::size_t i = 0; i < in.numel(); ++i) {
        if (!(in[i] > 0.0))
          throw ContractError("log: input " + std::to_string(in[i]) + " at flat index " +
                              std::to_string(i) + " is not strictly positive");
        out[i] = std::log(in[i]);
      }
      break;
    case Unary::Power:
      name = "power";
      for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::pow(in[i], arg);
      break;
  }
  return push(std::move(out), name, [this, x, fn, arg, out_id = vals_.size()]() {
    const Tensor& in = vals_[x];
    const Tensor& out = vals_[out_id];
    const Tensor& g = grads_[out_id];
    Tensor& gx = grads_[x];
    for (std::size_t i = 0; i < in.numel(); ++i) {
      double d = 0.0;
      switch (fn) {
        case Unary::Sigmoid: d = out[i] * (1.0 - out[i]); break;
        case Unary::Tanh: d = 1.0 - out[i] * out[i]; break;
        case Unary::Relu: d = in[i] > 0.0 ? 1.0 : 0.0; break;
        case Unary::LeakyRelu: d = in[i] > 0.0 ? 1.0 : arg; break;
        case Unary::Exp: d = out[i]; break;
        case Unary::Log: d = 1.0 / in[i]; break;
        case Unary::Power: d = arg * std::pow(in[i], arg - 1.0); break;
      }
      gx[i] += d * g[i];
    }
  });
}

ValueId Tape::matmul(ValueId a, ValueId b) {
  const Tensor& A = vals_[a];
  const Tensor& B = vals_[b];
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    throw DimensionError("matmul: shapes " + A.shape_str() + " x " + B.shape_str());
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C{{m, n}};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double av = A.at(i, l);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) C.at(i, j) += av * B.at(l, j);
    }
  return push(std::move(C), "matmul", [this, a, b, out_id = vals_.size()]() {
    const Tensor& A = vals_[a];
    const Tensor& B = vals_[b];
    const Tensor& g = grads_[out_id];
    Tensor& gA = grads_[a];
    Tensor& gB = grads_[b];
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    // dA = g * B^T, dB = A^T * g
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double gv = g.at(i, j);
        if (gv == 0.0) continue;
        for (std::size_t l = 0; l < k; ++l) {
          gA.at(i, l) += gv * B.at(l, j);
          gB.at(l, j) += A.at(i, l) * gv;
        }
      }
  });
}

ValueId Tape::transpose(ValueId x) {
  const Tensor& X = vals_[x];
  if (X.rank() != 2) throw DimensionError("transpose: shape " + X.shape_str());
  Tensor Y{{X.cols(), X.rows()}};
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) Y.at(j, i) = X.at(i, j);
  return push(std::move(Y), "transpose", [this, x, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    Tensor& gx = grads_[x];
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gx.at(j, i) += g.at(i, j);
  });
}

ValueId Tape::add(ValueId a, ValueId b) {
  const Tensor& A = vals_[a];
  const Tensor& B = vals_[b];
  if (!A.same_shape(B)) throw DimensionError("add: shapes " + A.shape_str() + " vs " + B.shape_str());
  Tensor C{A.shape()};
  for (std::size_t i = 0; i < A.numel(); ++i) C[i] = A[i] + B[i];
  return push(std::move(C), "add", [this, a, b, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += g[i];
      grads_[b][i] += g[i];
    }
  });
}

ValueId Tape::sub(ValueId a, ValueId b) {
  const Tensor& A = vals_[a];
  const Tensor& B = vals_[b];
  if (!A.same_shape(B)) throw DimensionError("sub: shapes " + A.shape_str() + " vs " + B.shape_str());
  Tensor C{A.shape()};
  for (std::size_t i = 0; i < A.numel(); ++i) C[i] = A[i] - B[i];
  return push(std::move(C), "sub", [this, a, b, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += g[i];
      grads_[b][i] -= g[i];
    }
  });
}

ValueId Tape::mul(ValueId a, ValueId b) {
  const Tensor& A = vals_[a];
  const Tensor& B = vals_[b];
  if (!A.same_shape(B)) throw DimensionError("mul: shapes " + A.shape_str() + " vs " + B.shape_str());
  Tensor C{A.shape()};
  for (std::size_t i = 0; i < A.numel(); ++i) C[i] = A[i] * B[i];
  return push(std::move(C), "mul", [this, a, b, out_id = vals_.size()]() {
    const Tensor& A = vals_[a];
    const Tensor& B = vals_[b];
    const Tensor& g = grads_[out_id];
    for (std::size_t i = 0; i < g.numel(); ++i) {
      grads_[a][i] += B[i] * g[i];
      grads_[b][i] += A[i] * g[i];
    }
  });
}

ValueId Tape::affine(ValueId x, double scale, double shift) {
  const Tensor& X = vals_[x];
  Tensor Y{X.shape()};
  for (std::size_t i = 0; i < X.numel(); ++i) Y[i] = scale * X[i] + shift;
  return push(std::move(Y), "affine", [this, x, scale, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    for (std::size_t i = 0; i < g.numel(); ++i) grads_[x][i] += scale * g[i];
  });
}

ValueId Tape::add_rowvec(ValueId m, ValueId v) {
  const Tensor& M = vals_[m];
  const Tensor& V = vals_[v];
  if (M.rank() != 2 || V.rank() != 1 || V.shape()[0] != M.cols())
    throw DimensionError("add_rowvec: shapes " + M.shape_str() + " + " + V.shape_str());
  Tensor Y{M.shape()};
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) Y.at(i, j) = M.at(i, j) + V[j];
  return push(std::move(Y), "add_rowvec", [this, m, v, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    Tensor& gm = grads_[m];
    Tensor& gv = grads_[v];
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        gm.at(i, j) += g.at(i, j);
        gv[j] += g.at(i, j);
      }
  });
}

ValueId Tape::concat_cols(std::span<const ValueId> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = vals_[parts[0]].rows();
  std::size_t total = 0;
  for (ValueId p : parts) {
    const Tensor& t = vals_[p];
    if (t.rank() != 2 || t.rows() != rows)
      throw DimensionError("concat_cols: shape " + t.shape_str());
    total += t.cols();
  }
  Tensor Y{{rows, total}};
  std::size_t off = 0;
  for (ValueId p : parts) {
    const Tensor& t = vals_[p];
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) Y.at(i, off + j) = t.at(i, j);
    off += t.cols();
  }
  std::vector<ValueId> ids(parts.begin(), parts.end());
  return push(std::move(Y), "concat_cols", [this, ids, out_id = vals_.size()]() {
    const Tensor& g = grads_[out_id];
    std::size_t off = 0;
    for (ValueId p : ids) {
      Tensor& gp = grads_[p];
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp.at(i, j) += g.at(i, off + j);
      off += gp.cols();
    }
  });
}

ValueId Tape::clamp_max(ValueId x, double cap, std::size_t* clamp_count) {
  const Tensor& X = vals_[x];
  Tensor Y{X.shape()};
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < X.numel(); ++i) {
    if (X[i] > cap) {
      Y[i] = cap;
      ++clamped;
    } else {
      Y[i] = X[i];
    }
  }
  if (clamp_count) *clamp_count += clamped;
  return push(std::move(Y), "clamp_max", [this, x, cap, out_id = vals_.size()]() {
    const Tensor& X = vals_[x];
    const Tensor& g = grads_[out_id];
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (X[i] <= cap) grads_[x][i] += g[i];
  });
}

ValueId Tape::masked_row_softmax(ValueId logits, Tensor mask) {
  const Tensor& L = vals_[logits];
  if (L.rank() != 2 || !L.same_shape(mask))
    throw DimensionError("masked_row_softmax: logits " + L.shape_str() + " vs mask " +
                         mask.shape_str());
  Tensor Y{L.shape()};
  for (std::size_t i = 0; i < L.rows(); ++i) {
    double mx = -1e300;
    bool any = false;
    for (std::size_t j = 0; j < L.cols(); ++j)
      if (mask.at(i, j) != 0.0) {
        any = true;
        mx = std::max(mx, L.at(i, j));
      }
    if (!any)
      throw ContractError("masked_row_softmax: row " + std::to_string(i) + " has no live entries");
    double denom = 0.0;
    for (std::size_t j = 0; j < L.cols(); ++j)
      if (mask.at(i, j) != 0.0) denom += std::exp(L.at(i, j) - mx);
    for (std::size_t j = 0; j < L.cols(); ++j)
      Y.at(i, j) = mask.at(i, j) != 0.0 ? std::exp(L.at(i, j) - mx) / denom : 0.0;
  }
  return push(std::move(Y), "masked_row_softmax",
              [this, logits, mask = std::move(mask), out_id = vals_.size()]() {
                const Tensor& Y = vals_[out_id];
                const Tensor& g = grads_[out_id];
                Tensor& gl = grads_[logits];
                for (std::size_t i = 0; i < Y.rows(); ++i) {
                  double dot = 0.0;
                  for (std::size_t j = 0; j < Y.cols(); ++j)
                    if (mask.at(i, j) != 0.0) dot += g.at(i, j) * Y.at(i, j);
                  for (std::size_t j = 0; j < Y.cols(); ++j)
                    if (mask.at(i, j) != 0.0)
                      gl.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
                }
              });
}

ValueId Tape::sum(ValueId x) {
  const Tensor& X = vals_[x];
  double s = 0.0;
  for (std::size_t i = 0; i < X.numel(); ++i) s += X[i];
  return push(Tensor::scalar(s), "sum", [this, x, out_id = vals_.size()]() {
    const double g = grads_[out_id][0];
    for (std::size_t i = 0; i < grads_[x].numel(); ++i) grads_[x][i] += g;
  });
}

ValueId Tape::sum_squares(ValueId x) {
  const Tensor& X = vals_[x];
  double s = 0.0;
  for (std::size_t i = 0; i < X.numel(); ++i) s += X[i] * X[i];
  return push(Tensor::scalar(s), "sum_squares", [this, x, out_id = vals_.size()]() {
    const Tensor& X = vals_[x];
    const double g = grads_[out_id][0];
    for (std::size_t i = 0; i < X.numel(); ++i) grads_[x][i] += 2.0 * X[i] * g;
  });
}

ValueId Tape::custom(const std::string& name, std::vector<ValueId> inputs, Tensor out,
                     CustomBackward backward) {
  return push(std::move(out), name,
              [this, inputs = std::move(inputs), backward = std::move(backward),
               out_id = vals_.size()]() {
                std::vector<Tensor> in_vals;
                std::vector<Tensor*> in_grads;
                in_vals.reserve(inputs.size());
                in_grads.reserve(inputs.size());
                for (ValueId id : inputs) {
                  in_vals.push_back(vals_[id]);
                  in_grads.push_back(&grads_[id]);
                }
                backward(in_vals, grads_[out_id], in_grads);
              });
}

void Tape::backward(ValueId loss) {
  if (vals_[loss].numel() != 1)
    throw ContractError("backward: loss has shape " + vals_[loss].shape_str() +
                        ", expected a scalar");
  grads_.clear();
  grads_.reserve(vals_.size());
  for (const Tensor& v : vals_) grads_.push_back(Tensor::zeros(v.shape()));
  grads_[loss][0] = 1.0;
  has_grads_ = true;
  for (std::size_t i = back_.size(); i-- > 0;)
    if (back_[i]) back_[i]();
}

GradCheckReport grad_check(const std::function<double(bool)>& eval,
                           std::span<Parameter* const> params, double step, double tolerance) {
  GradCheckReport report;
  eval(true);
  std::vector<Tensor> autodiff;
  autodiff.reserve(params.size());
  for (const Parameter* p : params) autodiff.push_back(p->grad);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = eval(false);
      p.value[i] = saved - step;
      const double down = eval(false);
      p.value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double ad = autodiff[pi][i];
      const double rel = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
      ++report.entries_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {p.name, i, ad, fd, rel};
      }
    }
  }
  (void)tolerance;
  return report;
}

}  // namespace stzitd
