#include "shillab/influence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shillab/errors.hpp"
#include "shillab/optim.hpp"

namespace shillab {

namespace {

std::size_t user_offset(const SurrogateMF& m, std::size_t u) {
  return u * m.rank;
}

std::size_t item_offset(const SurrogateMF& m, std::size_t i) {
  return (m.user_factors.rows() + i) * m.rank;
}

}  // namespace

std::vector<double> surrogate_hvp(const SurrogateMF& m, const RatingGraph& g,
                                  const std::vector<double>& w) {
  if (w.size() != m.param_count())
    throw ShapeError("surrogate_hvp: vector length " +
                     std::to_string(w.size()) + " != parameter count " +
                     std::to_string(m.param_count()));
  std::vector<double> out(w.size(), 0.0);
  std::size_t k = m.rank;
  // ridge contributes 2*lambda*I
  for (std::size_t j = 0; j < w.size(); ++j) out[j] = 2.0 * m.lambda * w[j];
  for (const Rating& r : g.ratings()) {
    const double* u = m.user_factors.data() + r.user * k;
    const double* v = m.item_factors.data() + r.item * k;
    const double* wu = w.data() + user_offset(m, r.user);
    const double* wv = w.data() + item_offset(m, r.item);
    double pred = 0.0, vwu = 0.0, uwv = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
      pred += u[d] * v[d];
      vwu += v[d] * wu[d];
      uwv += u[d] * wv[d];
    }
    double err = r.value - pred;
    double mix = vwu + uwv;
    double* ou = out.data() + user_offset(m, r.user);
    double* ov = out.data() + item_offset(m, r.item);
    for (std::size_t d = 0; d < k; ++d) {
      ou[d] += 2.0 * (mix * v[d] - err * wv[d]);
      ov[d] += 2.0 * (mix * u[d] - err * wu[d]);
    }
  }
  return out;
}

CgSolve hvp_solve(const SurrogateMF& m, const RatingGraph& g,
                  const std::vector<double>& v, double damping) {
  if (damping <= 0.0) throw ContractError("hvp_solve: damping must be > 0");
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError("hvp_solve: non-finite right-hand side");
  CgSolve res;
  res.x.assign(v.size(), 0.0);
  double vnorm = 0.0;
  for (double x : v) vnorm += x * x;
  vnorm = std::sqrt(vnorm);
  if (vnorm == 0.0) return res;

  auto apply = [&](const std::vector<double>& p) {
    std::vector<double> ap = surrogate_hvp(m, g, p);
    for (std::size_t j = 0; j < ap.size(); ++j) ap[j] += damping * p[j];
    return ap;
  };

  std::vector<double> r = v;
  std::vector<double> p = r;
  double rr = 0.0;
  for (double x : r) rr += x * x;
  double tol = 1e-6 * vnorm;
  for (res.iterations = 0; res.iterations < 100; ++res.iterations) {
    if (std::sqrt(rr) <= tol) break;
    std::vector<double> ap = apply(p);
    double pap = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) pap += p[j] * ap[j];
    if (pap <= 0.0)
      throw NumericError("hvp_solve: curvature lost, damping too small");
    double alpha = rr / pap;
    for (std::size_t j = 0; j < p.size(); ++j) {
      res.x[j] += alpha * p[j];
      r[j] -= alpha * ap[j];
    }
    double rr_new = 0.0;
    for (double x : r) rr_new += x * x;
    double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = r[j] + beta * p[j];
  }
  res.residual_norm = std::sqrt(rr);
  return res;
}

double surrogate_promotion_loss(const SurrogateMF& m, std::size_t target) {
  std::size_t nu = m.user_factors.rows();
  std::size_t ni = m.item_factors.rows();
  if (target >= ni)
    throw LookupError("surrogate_promotion_loss: unknown item " +
                      std::to_string(target));
  double loss = 0.0;
  std::vector<double> scores(ni);
  for (std::size_t u = 0; u < nu; ++u) {
    double mx = -1e300;
    for (std::size_t i = 0; i < ni; ++i) {
      scores[i] = m.predict(u, i);
      mx = std::max(mx, scores[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < ni; ++i) denom += std::exp(scores[i] - mx);
    loss += std::log(denom) + mx - scores[target];
  }
  return loss;
}

std::vector<double> surrogate_promotion_grad(const SurrogateMF& m,
                                             std::size_t target) {
  std::size_t nu = m.user_factors.rows();
  std::size_t ni = m.item_factors.rows();
  std::size_t k = m.rank;
  if (target >= ni)
    throw LookupError("surrogate_promotion_grad: unknown item " +
                      std::to_string(target));
  std::vector<double> grad(m.param_count(), 0.0);
  std::vector<double> sm(ni);
  for (std::size_t u = 0; u < nu; ++u) {
    double mx = -1e300;
    for (std::size_t i = 0; i < ni; ++i) {
      sm[i] = m.predict(u, i);
      mx = std::max(mx, sm[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < ni; ++i) {
      sm[i] = std::exp(sm[i] - mx);
      denom += sm[i];
    }
    for (std::size_t i = 0; i < ni; ++i) sm[i] /= denom;
    const double* uf = m.user_factors.data() + u * k;
    double* gu = grad.data() + user_offset(m, u);
    for (std::size_t i = 0; i < ni; ++i) {
      double coef = sm[i] - (i == target ? 1.0 : 0.0);
      if (coef == 0.0) continue;
      const double* vf = m.item_factors.data() + i * k;
      double* gv = grad.data() + item_offset(m, i);
      for (std::size_t d = 0; d < k; ++d) {
        gu[d] += coef * vf[d];
        gv[d] += coef * uf[d];
      }
    }
  }
  return grad;
}

std::vector<double> surrogate_user_grad(const SurrogateMF& m,
                                        const RatingGraph& g,
                                        std::size_t user) {
  const auto& profile = g.user_profile(user);
  if (profile.empty())
    throw ContractError("surrogate_user_grad: user " + std::to_string(user) +
                        " has an empty profile");
  std::size_t k = m.rank;
  std::vector<double> grad(m.param_count(), 0.0);
  const double* uf = m.user_factors.data() + user * k;
  double* gu = grad.data() + user_offset(m, user);
  for (const auto& [i, r] : profile) {
    const double* vf = m.item_factors.data() + i * k;
    double pred = 0.0;
    for (std::size_t d = 0; d < k; ++d) pred += uf[d] * vf[d];
    double err = r - pred;
    double* gv = grad.data() + item_offset(m, i);
    for (std::size_t d = 0; d < k; ++d) {
      gu[d] += -2.0 * err * vf[d];
      gv[d] += -2.0 * err * uf[d];
    }
  }
  return grad;
}

InfluenceScorer::InfluenceScorer(const SurrogateMF& m, const RatingGraph& g,
                                 std::size_t target, double damping)
    : model_(m), graph_(g) {
  std::vector<double> gadv = surrogate_promotion_grad(m, target);
  solve_ = hvp_solve(m, g, gadv, damping);
}

double InfluenceScorer::score(std::size_t user) const {
  // H is symmetric, so g_adv^T H^-1 g_user = (H^-1 g_adv) . g_user; the
  // per-user gradient is sparse, touching only the user row and rated items.
  const auto& profile = graph_.user_profile(user);
  if (profile.empty())
    throw ContractError("influence score: user " + std::to_string(user) +
                        " has an empty profile");
  std::size_t k = model_.rank;
  const double* uf = model_.user_factors.data() + user * k;
  const double* su = solve_.x.data() + user_offset(model_, user);
  double acc = 0.0;
  for (const auto& [i, r] : profile) {
    const double* vf = model_.item_factors.data() + i * k;
    const double* sv = solve_.x.data() + item_offset(model_, i);
    double pred = 0.0;
    for (std::size_t d = 0; d < k; ++d) pred += uf[d] * vf[d];
    double err = r - pred;
    for (std::size_t d = 0; d < k; ++d)
      acc += -2.0 * err * (vf[d] * su[d] + uf[d] * sv[d]);
  }
  return acc;
}

std::vector<double> InfluenceScorer::score_all() const {
  std::vector<double> out(graph_.num_users());
  for (std::size_t u = 0; u < graph_.num_users(); ++u) out[u] = score(u);
  return out;
}

Standardized standardize(const std::vector<double>& xs) {
  Standardized s;
  if (xs.empty()) throw ContractError("standardize: empty input");
  double n = static_cast<double>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  var /= n;
  s.stddev = std::sqrt(var);
  s.values.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k)
    s.values[k] = s.stddev == 0.0 ? 0.0 : (xs[k] - s.mean) / s.stddev;
  return s;
}

InfluencePredictor InfluencePredictor::init(std::size_t hidden, Rng& rng) {
  InfluencePredictor ip;
  auto fill = [&rng](num::Tensor& t, double scale) {
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = scale * rng.normal();
  };
  ip.w1 = num::Tensor(kFeatureDim, hidden);
  ip.b1 = num::Tensor(1, hidden);
  ip.w2 = num::Tensor(hidden, hidden);
  ip.b2 = num::Tensor(1, hidden);
  ip.w3 = num::Tensor(hidden, 1);
  ip.b3 = num::Tensor(1, 1);
  fill(ip.w1, std::sqrt(2.0 / kFeatureDim));
  fill(ip.w2, std::sqrt(2.0 / static_cast<double>(hidden)));
  fill(ip.w3, std::sqrt(2.0 / static_cast<double>(hidden)));
  return ip;
}

num::Var InfluencePredictor::forward_with(num::Tape& tape, num::Var x,
                                          num::Var w1, num::Var b1,
                                          num::Var w2, num::Var b2,
                                          num::Var w3, num::Var b3,
                                          double slope) {
  num::Var h1 = leaky_relu(add_rowvec(matmul(x, w1), b1), slope);
  num::Var h2 = leaky_relu(add_rowvec(matmul(h1, w2), b2), slope);
  return add_rowvec(matmul(h2, w3), b3);
}

num::Var InfluencePredictor::forward(num::Tape& tape, num::Var x) const {
  return forward_with(tape, x, tape.constant(w1), tape.constant(b1),
                      tape.constant(w2), tape.constant(b2), tape.constant(w3),
                      tape.constant(b3), slope);
}

double InfluencePredictor::predict(
    const std::array<double, kFeatureDim>& x) const {
  num::Tape tape;
  num::Tensor row(1, kFeatureDim);
  for (std::size_t c = 0; c < kFeatureDim; ++c) row(0, c) = x[c];
  return forward(tape, tape.constant(std::move(row))).value().item();
}

IpTrainResult train_ip(const num::Tensor& features,
                       const std::vector<double>& raw_scores,
                       std::size_t epochs, Rng& rng, std::size_t hidden,
                       double lr) {
  if (features.rows() != raw_scores.size())
    throw ShapeError("train_ip: feature rows " +
                     std::to_string(features.rows()) + " != score count " +
                     std::to_string(raw_scores.size()));
  if (features.rows() < 10)
    throw ContractError("train_ip: need at least 10 users, got " +
                        std::to_string(features.rows()));
  if (features.cols() != kFeatureDim)
    throw ShapeError("train_ip: expected " + std::to_string(kFeatureDim) +
                     " feature columns");

  Standardized st = standardize(raw_scores);
  num::Tensor targets(raw_scores.size(), 1);
  for (std::size_t k = 0; k < st.values.size(); ++k)
    targets(k, 0) = st.values[k];

  IpTrainResult out;
  out.predictor = InfluencePredictor::init(hidden, rng);
  out.target_mean = st.mean;
  out.target_stddev = st.stddev;
  InfluencePredictor& ip = out.predictor;

  num::AdamConfig adam;
  std::vector<num::Tensor*> params = {&ip.w1, &ip.b1, &ip.w2,
                                      &ip.b2, &ip.w3, &ip.b3};
  std::vector<num::AdamState> states(params.size());

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    num::Tape tape;
    num::Var x = tape.constant(features);
    num::Var y = tape.constant(targets);
    std::vector<num::Var> pv;
    pv.reserve(params.size());
    for (num::Tensor* p : params) pv.push_back(tape.input(*p));
    num::Var pred = InfluencePredictor::forward_with(
        tape, x, pv[0], pv[1], pv[2], pv[3], pv[4], pv[5], ip.slope);
    num::Var loss = mean_all(square(sub(pred, y)));
    out.mse_trace.push_back(loss.value().item());
    tape.backward(loss);
    double rate = num::cosine_lr(
        lr, static_cast<double>(epoch) / static_cast<double>(epochs));
    for (std::size_t j = 0; j < params.size(); ++j) {
      if (!tape.has_grad(pv[j])) continue;
      adam_step(*params[j], tape.grad(pv[j]), states[j], adam, rate);
    }
  }

  {
    num::Tape tape;
    num::Var pred = out.predictor.forward(tape, tape.constant(features));
    num::Var loss =
        mean_all(square(sub(pred, tape.constant(targets))));
    out.final_mse = loss.value().item();
  }
  return out;
}

void write_influence_csv(const std::string& path,
                         const std::vector<double>& raw,
                         const std::vector<double>& standardized) {
  if (raw.size() != standardized.size())
    throw ShapeError("write_influence_csv: column length mismatch");
  std::ofstream out(path);
  if (!out) throw ParseError("write_influence_csv: cannot open " + path);
  out << "user,raw,standardized\n";
  char buf[96];
  for (std::size_t u = 0; u < raw.size(); ++u) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", u, raw[u],
                  standardized[u]);
    out << buf;
  }
}

InfluenceCache read_influence_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_influence_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "user,raw,standardized")
    throw ParseError("read_influence_csv: bad header in " + path);
  InfluenceCache cache;
  std::size_t expected = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    std::getline(ls, tok, ',');
    if (static_cast<std::size_t>(std::stoul(tok)) != expected)
      throw ParseError("read_influence_csv: line " + std::to_string(lineno) +
                       ": users out of order");
    std::getline(ls, tok, ',');
    cache.raw.push_back(std::stod(tok));
    std::getline(ls, tok, ',');
    cache.standardized.push_back(std::stod(tok));
    ++expected;
  }
  return cache;
}

}  // namespace shillab
