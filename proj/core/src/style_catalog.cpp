#include "labelsynth/style_catalog.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "labelsynth/error.hpp"

namespace labelsynth {

namespace {

double sq_dist(const StyleVector& a, const StyleVector& b) {
  double s = 0;
  for (int i = 0; i < 3; ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

int nearest_center(const std::vector<StyleVector>& centers, const StyleVector& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = sq_dist(centers[c], p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KMeansResult kmeans(const std::vector<StyleVector>& points, const KMeansOptions& opt) {
  KMeansResult res;
  if (points.empty() || opt.k < 1) return res;
  const std::size_t n = points.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(opt.k), n);
  std::mt19937_64 rng(opt.seed);

  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  res.centers.push_back(points[pick(rng)]);
  std::vector<double> d2(n);
  while (res.centers.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = sq_dist(points[i], res.centers[static_cast<std::size_t>(nearest_center(res.centers, points[i]))]);
      total += d2[i];
    }
    if (total <= 0) {
      res.centers.push_back(points[pick(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0) {
        chosen = i;
        break;
      }
    }
    res.centers.push_back(points[chosen]);
  }

  res.assignment.assign(n, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
      res.assignment[i] = nearest_center(res.centers, points[i]);
      inertia += sq_dist(points[i], res.centers[static_cast<std::size_t>(res.assignment[i])]);
    }
    res.inertia_history.push_back(inertia);
    res.iterations = it + 1;

    std::vector<std::array<double, 3>> sums(k, {0, 0, 0});
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(res.assignment[i]);
      for (int d = 0; d < 3; ++d) sums[c][d] += points[i][d];
      ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (int d = 0; d < 3; ++d) res.centers[c][d] = static_cast<float>(sums[c][d] / counts[c]);
    }
    const double change = std::abs(previous - inertia);
    if (std::isfinite(previous) && (change <= opt.relative_tolerance * std::max(previous, 1e-300) || inertia == 0))
      break;
    previous = inertia;
  }
  // Final assignment against the settled centers.
  res.counts.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    res.assignment[i] = nearest_center(res.centers, points[i]);
    ++res.counts[static_cast<std::size_t>(res.assignment[i])];
  }
  return res;
}

StyleCatalog build_style_catalog(const std::vector<InstanceFeature>& features, const KMeansOptions& options,
                                 int num_classes) {
  StyleCatalog cat;
  cat.k = options.k;
  std::map<int32_t, std::vector<StyleVector>> by_class;
  for (int c = 0; c < num_classes; ++c) by_class[c];
  for (const auto& f : features)
    if (f.pixels > 0) by_class[f.class_id].push_back(f.vector);
  for (const auto& [cls, pts] : by_class) {
    KMeansOptions o = options;
    o.seed = options.seed + static_cast<std::uint64_t>(cls);
    const KMeansResult r = kmeans(pts, o);
    cat.classes[cls] = ClassStyles{r.centers, r.counts};
  }
  return cat;
}

nlohmann::json StyleCatalog::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  nlohmann::json cls = nlohmann::json::object();
  for (const auto& [id, s] : classes) {
    nlohmann::json centers = nlohmann::json::array();
    for (const auto& c : s.centers) centers.push_back({c[0], c[1], c[2]});
    cls[std::to_string(id)] = {{"centers", centers}, {"counts", s.counts}};
  }
  j["classes"] = cls;
  return j;
}

StyleCatalog StyleCatalog::from_json(const nlohmann::json& j) {
  StyleCatalog cat;
  try {
    cat.k = j.at("k").get<int>();
    for (const auto& [key, value] : j.at("classes").items()) {
      ClassStyles s;
      for (const auto& c : value.at("centers")) s.centers.push_back({c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()});
      s.counts = value.at("counts").get<std::vector<int>>();
      if (s.counts.size() != s.centers.size()) throw ConfigError("style catalog: counts/centers length differ");
      cat.classes[std::stoi(key)] = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("style catalog JSON: ") + e.what());
  }
  return cat;
}

void StyleCatalog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json().dump(2) << '\n';
}

StyleCatalog StyleCatalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("style catalog " + path + ": " + e.what());
  }
}

StyleVectors sample_styles(const StyleCatalog& catalog, const LabelMap& label, const InstanceMap& instance,
                           const std::map<int32_t, StyleSelection>& selection, std::uint64_t seed) {
  validate_pair(label, instance);
  const RegionIndex regions = RegionIndex::build(label, instance);
  StyleVectors out;
  for (const RegionKey& key : regions.keys) {
    auto it = selection.find(key.instance_id);
    const StyleSelection sel = it == selection.end() ? StyleSelection::random() : it->second;
    if (const auto* v = std::get_if<StyleVector>(&sel.choice)) {
      out[key] = *v;
      continue;
    }
    const ClassStyles* styles = catalog.find(key.class_id);
    if (!styles || styles->centers.empty())
      throw SelectionError("class " + std::to_string(key.class_id) + " has no style centers");
    if (const auto* idx = std::get_if<int>(&sel.choice)) {
      if (*idx < 0 || static_cast<std::size_t>(*idx) >= styles->centers.size())
        throw SelectionError("cluster " + std::to_string(*idx) + " out of range for instance " +
                             std::to_string(key.instance_id) + " (class " + std::to_string(key.class_id) + " has " +
                             std::to_string(styles->centers.size()) + " centers)");
      out[key] = styles->centers[static_cast<std::size_t>(*idx)];
    } else {
      // Per-region stream: a region's draw does not depend on other selections.
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(key.class_id), static_cast<std::uint32_t>(key.instance_id)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> pick(0, styles->centers.size() - 1);
      out[key] = styles->centers[pick(rng)];
    }
  }
  return out;
}

}  // namespace labelsynth
