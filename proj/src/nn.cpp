#include "planest/nn.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>

#include "planest/errors.hpp"

namespace planest {

MatF& ParamStore::add(const std::string& name, int rows, int cols) {
  if (has(name)) throw model_error("duplicate parameter " + name);
  entries.emplace_back(name, MatF::zeros(rows, cols));
  return entries.back().second;
}

MatF& ParamStore::add_weight(const std::string& name, int out, int in,
                             std::mt19937_64& rng) {
  MatF& w = add(name, out, in);
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : w.d)
    v = static_cast<float>((2.0 * unit_uniform(rng) - 1.0) * bound);
  return w;
}

MatF& ParamStore::add_bias(const std::string& name, int n) {
  return add(name, 1, n);
}

MatF& ParamStore::get(const std::string& name) {
  for (auto& [n, m] : entries)
    if (n == name) return m;
  throw model_error("unknown parameter " + name);
}

const MatF& ParamStore::get(const std::string& name) const {
  for (const auto& [n, m] : entries)
    if (n == name) return m;
  throw model_error("unknown parameter " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& [n, m] : entries)
    if (n == name) return true;
  return false;
}

std::vector<MatD> ParamStore::shadow() const {
  std::vector<MatD> out;
  out.reserve(entries.size());
  for (const auto& [n, m] : entries) out.push_back(m.cast<double>());
  return out;
}

void ParamStore::assign(const std::vector<MatF>& values) {
  if (values.size() != entries.size())
    throw model_error("parameter count mismatch in assign");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!entries[i].second.same_shape(values[i]))
      throw model_error("parameter shape mismatch in assign");
    entries[i].second = values[i];
  }
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>(v >> (8 * i));
  out.write(buf, 4);
}

uint32_t get_u32(std::istream& in) {
  char buf[4];
  in.read(buf, 4);
  if (!in) throw model_error("truncated parameter block");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  return v;
}

uint64_t fnv1a(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr uint64_t kFnvSeed = 0xcbf29ce484222325ull;

}  // namespace

void ParamStore::write(std::ostream& out) const {
  put_u32(out, static_cast<uint32_t>(entries.size()));
  uint64_t check = kFnvSeed;
  for (const auto& [name, m] : entries) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<uint32_t>(m.rows));
    put_u32(out, static_cast<uint32_t>(m.cols));
    out.write(reinterpret_cast<const char*>(m.d.data()),
              static_cast<std::streamsize>(m.d.size() * sizeof(float)));
    check = fnv1a(check, name.data(), name.size());
    check = fnv1a(check, m.d.data(), m.d.size() * sizeof(float));
  }
  for (int i = 0; i < 8; ++i)
    out.put(static_cast<char>(check >> (8 * i)));
}

ParamStore ParamStore::read(std::istream& in) {
  ParamStore store;
  uint32_t count = get_u32(in);
  uint64_t check = kFnvSeed;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rows = get_u32(in), cols = get_u32(in);
    MatF m(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(m.d.data()),
            static_cast<std::streamsize>(m.d.size() * sizeof(float)));
    if (!in) throw model_error("truncated parameter block");
    check = fnv1a(check, name.data(), name.size());
    check = fnv1a(check, m.d.data(), m.d.size() * sizeof(float));
    store.entries.emplace_back(std::move(name), std::move(m));
  }
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    int c = in.get();
    if (c == EOF) throw model_error("truncated parameter checksum");
    stored |= static_cast<uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if (stored != check) throw model_error("parameter checksum mismatch");
  return store;
}

void adam_step(std::vector<MatF*> params,
               const std::vector<const MatF*>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw model_error("adam: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const MatF* p : params) {
      state.m.push_back(MatF::zeros(p->rows, p->cols));
      state.v.push_back(MatF::zeros(p->rows, p->cols));
    }
  }
  if (state.m.size() != params.size())
    throw model_error("adam: state size mismatch");
  ++state.step;
  double b1t = std::pow(static_cast<double>(cfg.beta1), state.step);
  double b2t = std::pow(static_cast<double>(cfg.beta2), state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    MatF& p = *params[i];
    const MatF& g = *grads[i];
    if (!p.same_shape(g)) throw model_error("adam: shape mismatch");
    MatF& m = state.m[i];
    MatF& v = state.v[i];
    for (size_t k = 0; k < p.size(); ++k) {
      m.d[k] = cfg.beta1 * m.d[k] + (1.0f - cfg.beta1) * g.d[k];
      v.d[k] = cfg.beta2 * v.d[k] + (1.0f - cfg.beta2) * g.d[k] * g.d[k];
      double mhat = m.d[k] / (1.0 - b1t);
      double vhat = v.d[k] / (1.0 - b2t);
      p.d[k] -= static_cast<float>(cfg.lr * mhat /
                                   (std::sqrt(vhat) + cfg.eps));
    }
  }
}

GradCheckReport grad_check(const GraphBuilder& f, std::vector<MatD> params,
                           const GradCheckOptions& opt) {
  auto run = [&](const std::vector<MatD>& theta) {
    Tape<double> tape;
    std::vector<Tape<double>::Id> ids;
    ids.reserve(theta.size());
    for (const auto& m : theta) ids.push_back(tape.param(m));
    Tape<double>::Id loss = f(tape, ids);
    return std::pair{std::move(tape), loss};
  };

  auto [tape, loss] = run(params);
  tape.backward(loss);
  std::vector<MatD> analytic;
  {
    std::vector<Tape<double>::Id> ids;
    for (size_t i = 0; i < params.size(); ++i)
      ids.push_back(static_cast<Tape<double>::Id>(i));
    for (auto id : ids) analytic.push_back(tape.gradient(id));
  }

  // Enumerate (param, coord) pairs, optionally subsampled.
  std::vector<std::pair<size_t, size_t>> coords;
  for (size_t p = 0; p < params.size(); ++p)
    for (size_t c = 0; c < params[p].size(); ++c) coords.emplace_back(p, c);
  if (opt.max_coords > 0 &&
      coords.size() > static_cast<size_t>(opt.max_coords)) {
    std::mt19937_64 rng(opt.seed);
    for (int i = 0; i < opt.max_coords; ++i) {
      size_t j = i + static_cast<size_t>(unit_uniform(rng) *
                                         static_cast<double>(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(opt.max_coords);
  }

  auto eval_at = [&](size_t p, size_t c, double delta) {
    std::vector<MatD> theta = params;
    theta[p].d[c] += delta;
    auto [t2, l2] = run(theta);
    return t2.scalar(l2);
  };

  GradCheckReport report;
  for (auto [p, c] : coords) {
    double d1 = (eval_at(p, c, opt.h) - eval_at(p, c, -opt.h)) / (2 * opt.h);
    double half = opt.h / 2;
    double d2 = (eval_at(p, c, half) - eval_at(p, c, -half)) / (2 * half);
    double scale = std::max({1.0, std::abs(d1), std::abs(d2)});
    if (std::abs(d1 - d2) > opt.kink_tol * scale) {
      ++report.skipped;  // derivative unstable across step sizes: kink
      continue;
    }
    double a = analytic[p].d[c];
    double rel = std::abs(a - d2) / std::max(1e-8, std::abs(a) + std::abs(d2));
    report.max_rel_err = std::max(report.max_rel_err, rel);
    ++report.checked;
  }
  return report;
}

}  // namespace planest
