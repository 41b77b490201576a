#include "maint/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "maint/kernels.hpp"

namespace maint {

Tape::Var Tape::constant(Tensor t) { return push(std::move(t), {}); }

Tape::Var Tape::param(Parameter& p) {
  Parameter* pp = &p;
  Var out = push(p.value, nullptr);
  nodes_.back().back = [pp, out](Tape& t) {
    const Tensor& go = t.g(out);
    for (std::size_t k = 0; k < go.size(); ++k) pp->grad[k] += go[k];
  };
  return out;
}

Tape::Var Tape::param_row(Parameter& table, std::size_t row) {
  if (table.value.rank() != 2)
    throw DimensionError("param_row: table must be 2-D, got " + table.value.shape_string());
  if (row >= table.value.dim(0))
    throw std::out_of_range("param_row: row " + std::to_string(row) + " out of range " +
                            std::to_string(table.value.dim(0)));
  const std::size_t d = table.value.dim(1);
  Tensor v({d});
  std::copy_n(table.value.data() + row * d, d, v.data());
  Parameter* pp = &table;
  Var out = push(std::move(v), nullptr);
  nodes_.back().back = [pp, row, d, out](Tape& t) {
    const Tensor& go = t.g(out);
    for (std::size_t k = 0; k < d; ++k) pp->grad[row * d + k] += go[k];
  };
  return out;
}

Tape::Var Tape::linear(Var W, Var x, Var b) {
  const Tensor& Wv = value(W);
  const Tensor& xv = value(x);
  if (Wv.rank() != 2 || xv.rank() != 1 || Wv.dim(1) != xv.dim(0))
    throw DimensionError("linear: W " + Wv.shape_string() + " incompatible with x " +
                         xv.shape_string());
  const std::size_t m = Wv.dim(0), n = Wv.dim(1);
  Tensor y({m});
  kernels::matvec(Wv.data(), xv.data(), y.data(), m, n);
  if (b != kNone) {
    const Tensor& bv = value(b);
    if (bv.rank() != 1 || bv.dim(0) != m)
      throw DimensionError("linear: bias " + bv.shape_string() + " incompatible with W " +
                           Wv.shape_string());
    for (std::size_t i = 0; i < m; ++i) y[i] += bv[i];
  }
  Var out = push(std::move(y), nullptr);
  nodes_[static_cast<std::size_t>(out)].back = [W, x, b, out, m, n](Tape& t) {
    const Tensor& go = t.g(out);
    kernels::outer_accum(go.data(), t.val(x).data(), t.g(W).data(), m, n);
    kernels::matvec_t_accum(t.val(W).data(), go.data(), t.g(x).data(), m, n);
    if (b != kNone) {
      Tensor& gb = t.g(b);
      for (std::size_t i = 0; i < m; ++i) gb[i] += go[i];
    }
  };
  return out;
}

Tape::Var Tape::sigmoid(Var x) {
  Tensor y = value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [x, out](Tape& t) {
    const Tensor& yv = t.val(out);
    const Tensor& go = t.g(out);
    Tensor& gx = t.g(x);
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += go[i] * yv[i] * (1.0 - yv[i]);
  };
  return out;
}

Tape::Var Tape::tanh_(Var x) {
  Tensor y = value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [x, out](Tape& t) {
    const Tensor& yv = t.val(out);
    const Tensor& go = t.g(out);
    Tensor& gx = t.g(x);
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += go[i] * (1.0 - yv[i] * yv[i]);
  };
  return out;
}

Tape::Var Tape::softmax(Var x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 1 || xv.size() == 0)
    throw DimensionError("softmax: need non-empty 1-D input, got " + xv.shape_string());
  double mx = kMaskSentinel;
  for (std::size_t i = 0; i < xv.size(); ++i)
    if (xv[i] > kMaskThreshold) mx = std::max(mx, xv[i]);
  if (mx <= kMaskThreshold)
    throw EmptyDistributionError("softmax: every entry is masked");
  Tensor y({xv.size()});
  double z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    y[i] = (xv[i] <= kMaskThreshold) ? 0.0 : std::exp(xv[i] - mx);
    z += y[i];
  }
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= z;
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [x, out](Tape& t) {
    const Tensor& yv = t.val(out);
    const Tensor& go = t.g(out);
    Tensor& gx = t.g(x);
    double s = 0.0;
    for (std::size_t i = 0; i < yv.size(); ++i) s += go[i] * yv[i];
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += yv[i] * (go[i] - s);
  };
  return out;
}

Tape::Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: empty part list");
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    if (pv.rank() > 1)
      throw DimensionError("concat: parts must be 0-D or 1-D, got " + pv.shape_string());
    total += pv.size();
  }
  Tensor y({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    std::copy_n(pv.data(), pv.size(), y.data() + off);
    off += pv.size();
  }
  std::vector<Var> ps = parts;
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [ps, out](Tape& t) {
    const Tensor& go = t.g(out);
    std::size_t off2 = 0;
    for (Var p : ps) {
      Tensor& gp = t.g(p);
      for (std::size_t k = 0; k < gp.size(); ++k) gp[k] += go[off2 + k];
      off2 += gp.size();
    }
  };
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Tensor y = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [a, b, out](Tape& t) {
    const Tensor& go = t.g(out);
    Tensor& ga = t.g(a);
    Tensor& gb = t.g(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] += go[i];
      gb[i] += go[i];
    }
  };
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  Tensor y = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [a, b, out](Tape& t) {
    const Tensor& go = t.g(out);
    Tensor& ga = t.g(a);
    Tensor& gb = t.g(b);
    const Tensor& av = t.val(a);
    const Tensor& bv2 = t.val(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] += go[i] * bv2[i];
      gb[i] += go[i] * av[i];
    }
  };
  return out;
}

Tape::Var Tape::affine(Var x, double scale, double shift) {
  Tensor y = value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = scale * y[i] + shift;
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [x, out, scale](Tape& t) {
    const Tensor& go = t.g(out);
    Tensor& gx = t.g(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += scale * go[i];
  };
  return out;
}

Tape::Var Tape::scale_by(Var vec, Var scalar) {
  const Tensor& sv = value(scalar);
  if (sv.size() != 1) throw DimensionError("scale_by: scalar must be 0-D");
  const double s = sv[0];
  Tensor y = value(vec);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [vec, scalar, out](Tape& t) {
    const Tensor& go = t.g(out);
    const Tensor& vv = t.val(vec);
    const double s2 = t.val(scalar)[0];
    Tensor& gv = t.g(vec);
    Tensor& gs = t.g(scalar);
    for (std::size_t i = 0; i < go.size(); ++i) {
      gv[i] += go[i] * s2;
      gs[0] += go[i] * vv[i];
    }
  };
  return out;
}

Tape::Var Tape::pick(Var vec, std::size_t i) {
  const Tensor& vv = value(vec);
  if (vv.rank() != 1 || i >= vv.size())
    throw std::out_of_range("pick: index " + std::to_string(i) + " for " +
                            vv.shape_string());
  Var out = push(Tensor::scalar(vv[i]), nullptr);
  nodes_.back().back = [vec, i, out](Tape& t) { t.g(vec)[i] += t.g(out)[0]; };
  return out;
}

Tape::Var Tape::dot(Var a, Var b) {
  check_same_shape(value(a), value(b), "dot");
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  Var out = push(Tensor::scalar(kernels::serial::dot(av.data(), bv.data(), av.size())),
                 nullptr);
  nodes_.back().back = [a, b, out](Tape& t) {
    const double go = t.g(out)[0];
    const Tensor& av2 = t.val(a);
    const Tensor& bv2 = t.val(b);
    Tensor& ga = t.g(a);
    Tensor& gb = t.g(b);
    for (std::size_t i = 0; i < av2.size(); ++i) {
      ga[i] += go * bv2[i];
      gb[i] += go * av2[i];
    }
  };
  return out;
}

Tape::Var Tape::sum(Var x) {
  const Tensor& xv = value(x);
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i];
  Var out = push(Tensor::scalar(acc), nullptr);
  nodes_.back().back = [x, out](Tape& t) {
    const double go = t.g(out)[0];
    Tensor& gx = t.g(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
  };
  return out;
}

Tape::Var Tape::dropout(Var x, double rate, bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0,1), got " +
                                std::to_string(rate));
  if (!training || rate == 0.0) {
    // identity, but keep gradient flow
    return affine(x, 1.0, 0.0);
  }
  const Tensor& xv = value(x);
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> mask(xv.size());
  Tensor y({xv.size()});
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = (u(rng) < rate) ? 0.0 : 1.0 / keep;
    y[i] = xv[i] * mask[i];
  }
  Var out = push(std::move(y), nullptr);
  nodes_.back().back = [x, out, mask = std::move(mask)](Tape& t) {
    const Tensor& go = t.g(out);
    Tensor& gx = t.g(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mask[i];
  };
  return out;
}

Tape::Var Tape::cross_entropy(Var probs, std::size_t target) {
  const Tensor& pv = value(probs);
  if (pv.rank() != 1 || target >= pv.size())
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " out of range for " + pv.shape_string());
  const double p = pv[target] + kLogEps;
  Var out = push(Tensor::scalar(-std::log(p)), nullptr);
  nodes_.back().back = [probs, target, out, p](Tape& t) {
    t.g(probs)[target] += -t.g(out)[0] / p;
  };
  return out;
}

Tape::Var Tape::l2_penalty(const std::vector<Parameter*>& params) {
  Var out = push(Tensor::scalar(l2_penalty_value(params)), nullptr);
  std::vector<Parameter*> ps = params;
  nodes_.back().back = [ps, out](Tape& t) {
    const double go = t.g(out)[0];
    for (Parameter* p : ps)
      for (std::size_t k = 0; k < p->value.size(); ++k)
        p->grad[k] += go * 2.0 * p->value[k];
  };
  return out;
}

void Tape::backward(Var loss) {
  const std::size_t li = check(loss);
  if (nodes_[li].value.size() != 1)
    throw TapeError("backward: loss must be scalar, got " +
                    nodes_[li].value.shape_string());
  for (Node& n : nodes_) n.grad.fill(0.0);
  nodes_[li].grad[0] = 1.0;
  for (std::size_t i = li + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace maint
