#include "mpr/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "binio.hpp"

namespace mpr {

namespace {
constexpr char kMagic[5] = {'M', 'P', 'D', 'S', '1'};
constexpr uint32_t kVersion = 1;

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace

std::vector<double> AxisSpec::values() const {
  const double s = step * stride;
  const auto k_min = static_cast<long>(std::ceil(min / s - 1e-9));
  const auto k_max = static_cast<long>(std::floor(max / s + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<size_t>(std::max(0L, k_max - k_min + 1)));
  for (long k = k_min; k <= k_max; ++k) out.push_back(k == 0 ? 0.0 : k * s);
  return out;
}

void GridSpec::validate() const {
  auto check = [](const AxisSpec& a, const char* name) {
    if (a.step <= 0 || a.stride < 1 || a.max < a.min)
      throw std::invalid_argument(std::string("GridSpec: bad axis ") + name);
  };
  check(v0, "v0");
  check(delta0, "delta0");
  check(thetaf, "thetaf");
  if (x_step <= 0 || y_step <= 0 || x_stride < 1 || y_stride < 1)
    throw std::invalid_argument("GridSpec: position steps must be positive");
  time_grid.validate();
}

void GridSpec::reset_strides() {
  v0.stride = delta0.stride = thetaf.stride = 1;
  x_stride = y_stride = 1;
}

uint64_t GridSpec::hash() const {
  const double vals[] = {v0.min,      v0.max,      v0.step,      double(v0.stride),
                         delta0.min,  delta0.max,  delta0.step,  double(delta0.stride),
                         thetaf.min,  thetaf.max,  thetaf.step,  double(thetaf.stride),
                         x_step,      double(x_stride), y_step,  double(y_stride),
                         x_min,       y_abs_max,   time_grid.horizon_s, time_grid.step_s,
                         double(time_grid.n_points)};
  return fnv1a(vals, sizeof(vals));
}

std::pair<double, double> reachable_range(double v0, const VehicleParams& params,
                                          double horizon_s) {
  const double r_min = v0 * v0 / (2.0 * params.max_long_accel_m_s2);
  const double a_fwd = accel_bound(0.0, v0, params);
  const double r_max = 0.5 * a_fwd * horizon_s * horizon_s + v0 * horizon_s;
  return {r_min, r_max};
}

namespace {
template <typename Fn>
void for_each_query(const GridSpec& grid, const VehicleParams& params, Fn&& fn) {
  const auto v0s = grid.v0.values();
  const auto d0s = grid.delta0.values();
  const auto thetas = grid.thetaf.values();
  const double sx = grid.x_step * grid.x_stride;
  const double sy = grid.y_step * grid.y_stride;

  for (double v0 : v0s) {
    const auto [r_min, r_max] = reachable_range(v0, params, grid.time_grid.horizon_s);
    const double r_min2 = r_min * r_min;
    const double r_max2 = r_max * r_max;
    const auto kx_min = static_cast<long>(std::ceil(grid.x_min / sx - 1e-9));
    const auto kx_max = static_cast<long>(std::floor(r_max / sx + 1e-9));
    const double y_lim = std::min(r_max, grid.y_abs_max);
    const auto ky_max = static_cast<long>(std::floor(y_lim / sy + 1e-9));
    for (double d0 : d0s) {
      for (long kx = kx_min; kx <= kx_max; ++kx) {
        const double xf = kx == 0 ? 0.0 : kx * sx;
        for (long ky = -ky_max; ky <= ky_max; ++ky) {
          const double yf = ky == 0 ? 0.0 : ky * sy;
          const double r2 = xf * xf + yf * yf;
          if (r2 < r_min2 - 1e-9 || r2 > r_max2 + 1e-9) continue;
          for (double th : thetas) fn(Query{v0, d0, xf, yf, th});
        }
      }
    }
  }
}
}  // namespace

std::vector<Query> enumerate_queries(const GridSpec& grid, const VehicleParams& params) {
  grid.validate();
  params.validate();
  std::vector<Query> out;
  for_each_query(grid, params, [&out](const Query& q) { out.push_back(q); });
  return out;
}

size_t count_queries(const GridSpec& grid, const VehicleParams& params) {
  grid.validate();
  params.validate();
  size_t n = 0;
  for_each_query(grid, params, [&n](const Query&) { ++n; });
  return n;
}

Dataset build_dataset(const GridSpec& grid, const VehicleParams& params, const OcpConfig& config,
                      int jobs, const std::function<void(const GenProgress&)>& progress) {
  const std::vector<Query> queries = enumerate_queries(grid, params);
  std::vector<std::optional<Sample>> results(queries.size());

  std::atomic<size_t> next{0};
  std::atomic<size_t> done{0};
  std::atomic<size_t> accepted{0};
  std::mutex progress_mutex;

  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      OcpSolution sol = solve(queries[i], params, grid.time_grid, config);
      if (sol.converged) {
        results[i] = Sample{queries[i], sol.trajectory(), sol.objective};
        accepted.fetch_add(1);
      }
      const size_t d = done.fetch_add(1) + 1;
      if (progress && (d % 500 == 0 || d == queries.size())) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(GenProgress{d, queries.size(), accepted.load()});
      }
    }
  };

  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(jobs));
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  Dataset ds;
  ds.grid_spec = grid;
  ds.params = params;
  ds.config_hash = config.hash() ^ (grid.hash() * 0x9E3779B97F4A7C15ull);
  ds.samples.reserve(accepted.load());
  for (auto& r : results)
    if (r) ds.samples.push_back(std::move(*r));
  ds.accepted = ds.samples.size();
  ds.rejected = queries.size() - ds.samples.size();
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, uint64_t seed) {
  if (dataset.samples.empty()) throw std::invalid_argument("split: empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split: fraction must lie in (0, 1)");
  std::vector<size_t> idx(dataset.samples.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = static_cast<size_t>(
      std::llround(train_fraction * static_cast<double>(idx.size())));
  Dataset train = dataset, test = dataset;
  train.samples.clear();
  test.samples.clear();
  for (size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? train : test).samples.push_back(dataset.samples[idx[i]]);
  return {std::move(train), std::move(test)};
}

namespace {
void write_axis(binio::Writer& w, const AxisSpec& a) {
  w.f64(a.min);
  w.f64(a.max);
  w.f64(a.step);
  w.u32(static_cast<uint32_t>(a.stride));
}

AxisSpec read_axis(binio::Reader& r) {
  AxisSpec a;
  a.min = r.f64();
  a.max = r.f64();
  a.step = r.f64();
  a.stride = static_cast<int>(r.u32());
  return a;
}
}  // namespace

void save(const Dataset& dataset, const std::filesystem::path& path) {
  binio::Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.u64(dataset.samples.size());
  w.u64(dataset.seed);
  w.u64(dataset.config_hash);
  const TimeGrid& tg = dataset.grid_spec.time_grid;
  w.u32(static_cast<uint32_t>(tg.n_points));
  w.f64(tg.horizon_s);
  w.f64(tg.step_s);
  const VehicleParams& p = dataset.params;
  for (double v : {p.wheelbase_m, p.max_steer_rad, p.max_steer_rate_rad_s, p.max_speed_m_s,
                   p.min_speed_m_s, p.max_long_accel_m_s2, p.max_lat_accel_m_s2,
                   p.switching_speed_m_s})
    w.f64(v);
  write_axis(w, dataset.grid_spec.v0);
  write_axis(w, dataset.grid_spec.delta0);
  write_axis(w, dataset.grid_spec.thetaf);
  w.f64(dataset.grid_spec.x_step);
  w.u32(static_cast<uint32_t>(dataset.grid_spec.x_stride));
  w.f64(dataset.grid_spec.y_step);
  w.u32(static_cast<uint32_t>(dataset.grid_spec.y_stride));
  w.f64(dataset.grid_spec.x_min);
  w.f64(dataset.grid_spec.y_abs_max);
  w.u64(dataset.accepted);
  w.u64(dataset.rejected);
  const uint64_t row_doubles = 5 + 5 * static_cast<uint64_t>(tg.n_points) + 1;
  w.u64(row_doubles);
  for (const Sample& s : dataset.samples) {
    const Vec5 q = s.query.vec();
    w.f64s(q.data(), 5);
    w.f64s(s.trajectory.data(), static_cast<size_t>(s.trajectory.size()));
    w.f64(s.ocp_objective);
  }
  binio::write_file(path.string(), w);
}

Dataset load(const std::filesystem::path& path) {
  const std::vector<char> file = binio::read_file(path.string());
  binio::Reader r = binio::checked_reader(file);
  char magic[5];
  r.raw(magic, 5);
  if (std::memcmp(magic, kMagic, 5) != 0) throw FormatError("bad magic", 0);
  const uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported version", 5);
  Dataset ds;
  const uint64_t count = r.u64();
  ds.seed = r.u64();
  ds.config_hash = r.u64();
  TimeGrid tg;
  tg.n_points = static_cast<int>(r.u32());
  tg.horizon_s = r.f64();
  tg.step_s = r.f64();
  ds.grid_spec.time_grid = tg;
  VehicleParams& p = ds.params;
  for (double* v : {&p.wheelbase_m, &p.max_steer_rad, &p.max_steer_rate_rad_s, &p.max_speed_m_s,
                    &p.min_speed_m_s, &p.max_long_accel_m_s2, &p.max_lat_accel_m_s2,
                    &p.switching_speed_m_s})
    *v = r.f64();
  ds.grid_spec.v0 = read_axis(r);
  ds.grid_spec.delta0 = read_axis(r);
  ds.grid_spec.thetaf = read_axis(r);
  ds.grid_spec.x_step = r.f64();
  ds.grid_spec.x_stride = static_cast<int>(r.u32());
  ds.grid_spec.y_step = r.f64();
  ds.grid_spec.y_stride = static_cast<int>(r.u32());
  ds.grid_spec.x_min = r.f64();
  ds.grid_spec.y_abs_max = r.f64();
  ds.accepted = r.u64();
  ds.rejected = r.u64();
  const uint64_t row_doubles = r.u64();
  const uint64_t expected = 5 + 5 * static_cast<uint64_t>(tg.n_points) + 1;
  if (row_doubles != expected) throw FormatError("row length disagrees with grid", r.pos() - 8);
  if (r.remaining() != count * row_doubles * 8)
    throw FormatError("body size disagrees with header count", r.pos());
  ds.samples.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    Vec5 q;
    r.f64s(q.data(), 5);
    Sample& s = ds.samples[i];
    s.query = Query::from_vec(q);
    s.trajectory.resize(tg.n_points, 5);
    r.f64s(s.trajectory.data(), static_cast<size_t>(s.trajectory.size()));
    s.ocp_objective = r.f64();
  }
  return ds;
}

void export_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  const int M = dataset.grid_spec.time_grid.n_points;
  f << "v0,delta0,xf,yf,thetaf";
  const char* channels[5] = {"x", "y", "v", "steer", "yaw"};
  for (const char* ch : channels)
    for (int i = 0; i < M; ++i) f << ',' << ch << '_' << i;
  f << ",objective\n";
  f.precision(17);
  for (const Sample& s : dataset.samples) {
    f << s.query.v0_m_s << ',' << s.query.delta0_rad << ',' << s.query.xf_m << ','
      << s.query.yf_m << ',' << s.query.thetaf_rad;
    const double* d = s.trajectory.data();
    for (Eigen::Index i = 0; i < s.trajectory.size(); ++i) f << ',' << d[i];
    f << ',' << s.ocp_objective << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace mpr
