// SPDX-FileCopyrightText: 2026 The perbranch authors
// SPDX-License-Identifier: Apache-2.0

#include "perbranch/branching_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "perbranch/parallel.hpp"

namespace perbranch {

namespace {

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      c_ += (sum_ - t) + x;
    else
      c_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

MomentEstimate estimate(const std::vector<double>& xs) {
  MomentEstimate e;
  e.count = static_cast<long>(xs.size());
  if (xs.empty()) return e;
  CompensatedSum s;
  for (double x : xs) s.add(x);
  e.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    CompensatedSum q;
    for (double x : xs) q.add((x - e.mean) * (x - e.mean));
    e.variance = q.value() / static_cast<double>(xs.size() - 1);
    e.se = std::sqrt(e.variance / static_cast<double>(xs.size()));
  }
  return e;
}

Vec vec_from_json(const nlohmann::json& node, int dim, const char* what) {
  Vec v(dim);
  if (node.is_number()) {
    if (dim != 1) throw ConfigError(std::string(what) + " must be an array in d=2");
    v[0] = node.get<double>();
    return v;
  }
  if (!node.is_array() || static_cast<int>(node.size()) != dim)
    throw ConfigError(std::string(what) + " must have " + std::to_string(dim) + " components");
  for (int i = 0; i < dim; ++i) v[i] = node[static_cast<size_t>(i)].get<double>();
  return v;
}

struct ReplicaResult {
  std::vector<double> values;  // per time: N, n^y per target, center (d), valid flag
  bool censored = false;
  bool monotone = true;
};

}  // namespace

void SimConfig::validate() const {
  if (!media) throw ConfigError("simulation needs a medium");
  const int d = media->dim();
  if (x0.size() != d) throw ConfigError("initial position dimension does not match media");
  if (sample_times.empty()) throw ConfigError("simulation needs at least one sample time");
  double prev = 0.0;
  for (double t : sample_times) {
    if (!(t >= prev)) throw ConfigError("sample times must be nondecreasing and nonnegative");
    prev = t;
  }
  if (!(dt > 0.0)) throw ConfigError("simulation time step must be positive");
  if (replicas < 1) throw ConfigError("simulation needs at least one replica");
  if (cap < 1) throw ConfigError("population cap must be positive");
  for (const auto& y : targets)
    if (y.size() != d) throw ConfigError("target dimension does not match media");
  const TorusGrid probe(d, 64);
  const GridFunction a = sample_field(media->branching(), probe);
  const GridFunction b = sample_field(media->killing(), probe);
  const double event_rate = (a + b).maxCoeff();
  if (!(dt * event_rate < 0.1)) {
    std::ostringstream os;
    os << "dt * max(alpha + beta) = " << dt * event_rate << " must stay below 0.1";
    throw ConfigError(os.str());
  }
  const double growth = (a - b).maxCoeff();
  const double needed = 10.0 * std::exp(std::max(growth, 0.0) * horizon());
  if (!cap_override && static_cast<double>(cap) < needed) {
    std::ostringstream os;
    os << "population cap " << cap << " is below 10 e^{max r T} = " << needed << " (set cap_override to accept)";
    throw ConfigError(os.str());
  }
}

SimConfig sim_config_from_json(const nlohmann::json& block, MediaPtr media) {
  if (!media) throw ConfigError("simulation needs a medium");
  if (!block.is_object()) throw ConfigError("sim block must be an object");
  const int d = media->dim();
  SimConfig c;
  c.media = std::move(media);
  try {
    c.x0 = block.contains("x0") ? vec_from_json(block["x0"], d, "x0") : Vec::Zero(d);
    if (block.contains("times")) {
      c.sample_times = block["times"].get<std::vector<double>>();
    } else if (block.contains("T")) {
      c.sample_times = {block["T"].get<double>()};
    } else {
      throw ConfigError("sim block needs T or times");
    }
    c.dt = block.value("dt", c.dt);
    c.replicas = block.value("replicas", c.replicas);
    c.seed = block.value("seed", c.seed);
    c.cap = block.value("cap", c.cap);
    c.cap_override = block.value("cap_override", c.cap_override);
    c.frozen = block.value("frozen", c.frozen);
    c.field_nodes = block.value("field_nodes", c.field_nodes);
    if (block.contains("targets"))
      for (const auto& t : block["targets"]) c.targets.push_back(vec_from_json(t, d, "target"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sim block: ") + e.what());
  }
  return c;
}

FieldTable::FieldTable(const MediaSpec& media, int nodes_per_axis)
    : dim_(media.dim()), n_(nodes_per_axis), stride_(dim_ + dim_ * dim_ + 2) {
  if (n_ < 2) throw ConfigError("field table needs at least two nodes per axis");
  const TorusGrid grid(dim_, n_);
  data_.resize(static_cast<size_t>(grid.size() * stride_));
  for (Index node = 0; node < grid.size(); ++node) {
    const auto c = grid.coords(node);
    const std::span<const double> x(c.data(), static_cast<size_t>(dim_));
    double* out = data_.data() + node * stride_;
    const Vec b = media.drift_at(x);
    const Mat s = symmetric_sqrt(media.diffusion_at(x));
    for (int i = 0; i < dim_; ++i) out[i] = b[i];
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) out[dim_ + i * dim_ + j] = s(i, j);
    out[dim_ + dim_ * dim_] = media.branching()(x);
    out[dim_ + dim_ * dim_ + 1] = media.killing()(x);
  }
}

FieldTable::Local FieldTable::at(const double* x) const {
  Local l;
  auto axis = [this](double xj, long& i0, long& i1) {
    const double s = (xj - std::floor(xj)) * n_;
    long i = static_cast<long>(s);
    const double frac = s - static_cast<double>(i);
    if (i >= n_) i -= n_;
    i0 = i;
    i1 = i + 1 == n_ ? 0 : i + 1;
    return frac;
  };
  long i0, i1;
  const double fx = axis(x[0], i0, i1);
  if (dim_ == 1) {
    const double* p = data_.data() + i0 * stride_;
    const double* q = data_.data() + i1 * stride_;
    const double w = 1.0 - fx;
    l.drift[0] = w * p[0] + fx * q[0];
    l.sigma[0] = w * p[1] + fx * q[1];
    l.alpha = w * p[2] + fx * q[2];
    l.beta = w * p[3] + fx * q[3];
    return l;
  }
  long j0, j1;
  const double fy = axis(x[1], j0, j1);
  const double* c[4] = {data_.data() + (j0 * n_ + i0) * stride_, data_.data() + (j0 * n_ + i1) * stride_,
                        data_.data() + (j1 * n_ + i0) * stride_, data_.data() + (j1 * n_ + i1) * stride_};
  const double w[4] = {(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy};
  std::array<double, 8> acc{};
  for (int corner = 0; corner < 4; ++corner)
    for (int q = 0; q < 8; ++q) acc[static_cast<size_t>(q)] += w[corner] * c[corner][q];
  l.drift = {acc[0], acc[1]};
  l.sigma = {acc[2], acc[3], acc[4], acc[5]};
  l.alpha = acc[6];
  l.beta = acc[7];
  return l;
}

Ensemble::Ensemble(std::uint64_t seed, std::uint64_t replica_id, const Vec& x0)
    : replica(replica_id), dim(static_cast<int>(x0.size())), positions(x0.data(), x0.data() + x0.size()),
      rng(seed, replica_id) {}

void step_ensemble(Ensemble& ens, const FieldTable& fields, double dt, long cap, bool frozen) {
  if (ens.censored) return;
  const std::size_t d = static_cast<std::size_t>(ens.dim);
  const double sqrt_dt = std::sqrt(dt);
  const std::size_t n0 = ens.size();
  std::vector<double>& pos = ens.positions;
  std::size_t write = 0;
  std::size_t daughters = 0;
  std::array<double, 2> x{};
  for (std::size_t p = 0; p < n0; ++p) {
    for (std::size_t j = 0; j < d; ++j) x[j] = pos[p * d + j];
    const FieldTable::Local f = fields.at(x.data());
    if (!frozen) {
      if (d == 1) {
        x[0] += f.drift[0] * dt + f.sigma[0] * sqrt_dt * ens.rng.normal();
      } else {
        const double xi0 = ens.rng.normal(), xi1 = ens.rng.normal();
        x[0] += f.drift[0] * dt + (f.sigma[0] * xi0 + f.sigma[1] * xi1) * sqrt_dt;
        x[1] += f.drift[1] * dt + (f.sigma[2] * xi0 + f.sigma[3] * xi1) * sqrt_dt;
      }
    }
    const double total = f.alpha + f.beta;
    int copies = 1;
    if (total > 0.0) {
      const double u = ens.rng.uniform();
      const double p_event = -std::expm1(-total * dt);
      if (u < p_event) copies = u < p_event * (f.alpha / total) ? 2 : 0;
    }
    if (copies == 0) continue;
    for (std::size_t j = 0; j < d; ++j) pos[write * d + j] = x[j];
    ++write;
    if (copies == 2) {
      // daughters go to the tail, past the parents still to be visited
      for (std::size_t j = 0; j < d; ++j) pos.push_back(x[j]);
      ++daughters;
    }
  }
  // move the daughters down behind the surviving parents
  if (write < n0) {
    std::copy(pos.begin() + static_cast<std::ptrdiff_t>(n0 * d), pos.end(), pos.begin() + static_cast<std::ptrdiff_t>(write * d));
  }
  pos.resize((write + daughters) * d);
  ens.time += dt;
  if (static_cast<long>(ens.size()) > cap) ens.censored = true;
}

CountStatistics run_replicas(const SimConfig& config) {
  config.validate();
  const int d = config.media->dim();
  const FieldTable fields(*config.media, config.field_nodes > 0 ? config.field_nodes : (d == 1 ? 2048 : 256));
  const std::size_t n_times = config.sample_times.size();
  const std::size_t n_targets = config.targets.size();
  const std::size_t stride = 1 + n_targets + static_cast<std::size_t>(d) + 1;

  // Fixed step schedule: each sample interval is split into equal steps no longer than dt.
  std::vector<std::pair<long, double>> segments;
  double t = 0.0;
  for (double s : config.sample_times) {
    const double span = s - t;
    if (span > 1e-14) {
      const long steps = std::max(1L, std::lround(std::ceil(span / config.dt - 1e-9)));
      segments.emplace_back(steps, span / static_cast<double>(steps));
    } else {
      segments.emplace_back(0L, 0.0);
    }
    t = s;
  }

  std::vector<ReplicaResult> results(static_cast<std::size_t>(config.replicas));
  parallel_for(
      results.size(),
      [&](std::size_t r) {
        Ensemble ens(config.seed, r, config.x0);
        ReplicaResult& out = results[r];
        out.values.assign(n_times * stride, 0.0);
        std::size_t last = ens.size();
        for (std::size_t k = 0; k < n_times && !ens.censored; ++k) {
          const auto [steps, dt] = segments[k];
          for (long s = 0; s < steps && !ens.censored; ++s) {
            step_ensemble(ens, fields, dt, config.cap, config.frozen);
            if (ens.size() < last) out.monotone = false;
            last = ens.size();
          }
          if (ens.censored) break;
          double* v = out.values.data() + k * stride;
          const std::size_t n = ens.size();
          v[0] = static_cast<double>(n);
          for (std::size_t p = 0; p < n; ++p) {
            const double* x = ens.positions.data() + p * static_cast<std::size_t>(d);
            for (std::size_t q = 0; q < n_targets; ++q) {
              bool inside = true;
              for (int j = 0; j < d; ++j) inside = inside && std::floor(x[j] - config.targets[q][j]) == 0.0;
              if (inside) v[1 + q] += 1.0;
            }
            for (int j = 0; j < d; ++j) v[1 + n_targets + static_cast<std::size_t>(j)] += x[j];
          }
          if (n > 0) {
            for (int j = 0; j < d; ++j) v[1 + n_targets + static_cast<std::size_t>(j)] /= static_cast<double>(n);
            v[stride - 1] = 1.0;
          }
        }
        out.censored = ens.censored;
      },
      config.threads);

  CountStatistics stats;
  stats.times = config.sample_times;
  stats.targets = config.targets;
  stats.replicas = config.replicas;
  stats.seed = config.seed;
  stats.dt = config.dt;
  stats.media_hash = config.media->hash();
  for (const auto& r : results) {
    if (r.censored) ++stats.censored;
    stats.monotone_total = stats.monotone_total && (r.censored || r.monotone);
  }
  if (static_cast<double>(stats.censored) > 0.01 * static_cast<double>(config.replicas)) {
    std::ostringstream os;
    os << stats.censored << " of " << config.replicas << " replicas exceeded the population cap " << config.cap;
    throw RunError(os.str());
  }

  auto column = [&](std::size_t k, std::size_t offset, int power, bool need_valid) {
    std::vector<double> xs;
    xs.reserve(results.size());
    for (const auto& r : results) {
      if (r.censored) continue;
      const double* v = r.values.data() + k * stride;
      if (need_valid && v[stride - 1] == 0.0) continue;
      xs.push_back(std::pow(v[offset], power));
    }
    return xs;
  };
  stats.total.resize(n_times);
  stats.cube.assign(n_targets, std::vector<std::array<MomentEstimate, 3>>(n_times));
  stats.center.assign(n_times, std::vector<MomentEstimate>(static_cast<std::size_t>(d)));
  stats.center_square.assign(n_times, std::vector<MomentEstimate>(static_cast<std::size_t>(d)));
  for (std::size_t k = 0; k < n_times; ++k) {
    for (int p = 1; p <= 3; ++p) {
      stats.total[k][static_cast<std::size_t>(p - 1)] = estimate(column(k, 0, p, false));
      for (std::size_t q = 0; q < n_targets; ++q)
        stats.cube[q][k][static_cast<std::size_t>(p - 1)] = estimate(column(k, 1 + q, p, false));
    }
    for (int j = 0; j < d; ++j) {
      const std::size_t off = 1 + n_targets + static_cast<std::size_t>(j);
      auto xs = column(k, off, 1, true);
      stats.center[k][static_cast<std::size_t>(j)] = estimate(xs);
      for (double& x : xs) x = (x - config.x0[j]) * (x - config.x0[j]);
      stats.center_square[k][static_cast<std::size_t>(j)] = estimate(xs);
    }
    if (config.keep_total_samples) stats.total_samples.push_back(column(k, 0, 1, false));
  }
  return stats;
}

std::vector<ComparisonRow> compare_to_theory(const CountStatistics& stats, std::span<const Prediction> predictions) {
  std::vector<ComparisonRow> rows;
  for (const auto& p : predictions) {
    if (!p.media_hash.empty() && p.media_hash != stats.media_hash) {
      std::ostringstream os;
      os << "prediction '" << p.label << "' was computed for media " << p.media_hash << ", statistics for "
         << stats.media_hash;
      throw RunError(os.str());
    }
    if (p.time >= stats.times.size()) throw DomainError("prediction time index out of range");
    const MomentEstimate* e = nullptr;
    switch (p.quantity) {
      case Prediction::Quantity::Total:
        if (p.power < 1 || p.power > 3) throw DomainError("prediction power must be 1..3");
        e = &stats.total[p.time][static_cast<std::size_t>(p.power - 1)];
        break;
      case Prediction::Quantity::Cube:
        if (p.power < 1 || p.power > 3) throw DomainError("prediction power must be 1..3");
        if (p.target >= stats.cube.size()) throw DomainError("prediction target index out of range");
        e = &stats.cube[p.target][p.time][static_cast<std::size_t>(p.power - 1)];
        break;
      case Prediction::Quantity::Center:
        if (p.target >= stats.center[p.time].size()) throw DomainError("prediction axis out of range");
        e = &stats.center[p.time][p.target];
        break;
    }
    ComparisonRow row;
    row.label = p.label;
    row.empirical = e->mean * p.scale;
    row.se = e->se * std::abs(p.scale);
    row.predicted = p.value;
    const double diff = row.empirical - row.predicted;
    row.z = row.se > 0.0 ? diff / row.se : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
    row.pass = std::abs(row.z) <= 3.0;
    rows.push_back(row);
  }
  return rows;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * dmax;
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    for (int k = 1; k <= 100; ++k) {
      const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
      p += term;
      if (std::abs(term) < 1e-12) break;
    }
  }
  return {dmax, std::clamp(p, 0.0, 1.0)};
}

}  // namespace perbranch
