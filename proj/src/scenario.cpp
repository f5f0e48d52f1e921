#include "nucspde/scenario.hpp"

#include "nucspde/rng.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace nucspde {

using nlohmann::json;

namespace {

std::string child(const std::string& pointer, const std::string& key) { return pointer + "/" + key; }
std::string child(const std::string& pointer, std::size_t i) { return pointer + "/" + std::to_string(i); }

const json& require(const json& j, const std::string& key, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(child(pointer, key), "missing required field");
  return *it;
}

double number(const json& j, const std::string& pointer) {
  if (!j.is_number()) throw ConfigError(pointer, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(pointer, "expected a finite number");
  return v;
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& pointer) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), child(pointer, key));
}

std::uint64_t count(const json& j, const std::string& pointer) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ConfigError(pointer, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

std::uint64_t count_or(const json& j, const std::string& key, std::uint64_t fallback, const std::string& pointer) {
  if (!j.contains(key)) return fallback;
  return count(j.at(key), child(pointer, key));
}

std::string text(const json& j, const std::string& pointer) {
  if (!j.is_string()) throw ConfigError(pointer, "expected a string");
  return j.get<std::string>();
}

std::string text_or(const json& j, const std::string& key, std::string fallback, const std::string& pointer) {
  if (!j.contains(key)) return fallback;
  return text(j.at(key), child(pointer, key));
}

void allow_keys(const json& j, std::initializer_list<const char*> keys, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ConfigError(child(pointer, it.key()), "unknown field");
  }
}

Vector spectrum_from(const json& j, std::size_t dim, const std::string& pointer) {
  if (j.is_string()) {
    try {
      return DiagonalSemigroup::from_tag(j.get<std::string>(), dim).spectrum();
    } catch (const std::exception& e) {
      throw ConfigError(pointer, e.what());
    }
  }
  Vector v = parse_vector(j, dim, pointer);
  if ((v.array() < 0.0).any()) throw ConfigError(pointer, "spectrum must be nonnegative");
  return v;
}

std::vector<LevyAtom> atoms_from(const json& j, std::size_t dim, const std::string& pointer) {
  std::vector<LevyAtom> atoms;
  if (!j.is_array()) throw ConfigError(pointer, "expected an array of atoms");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = child(pointer, i);
    const json& a = j[i];
    if (a.is_object() && a.contains("radial")) {
      allow_keys(a, {"radial"}, p);
      const json& r = a["radial"];
      const std::string rp = child(p, "radial");
      allow_keys(r, {"direction", "intensity", "scale", "count"}, rp);
      try {
        auto more = atomize_radial_gaussian(DualVector(parse_vector(require(r, "direction", rp), dim, child(rp, "direction"))),
                                            number(require(r, "intensity", rp), child(rp, "intensity")),
                                            number(require(r, "scale", rp), child(rp, "scale")),
                                            count(require(r, "count", rp), child(rp, "count")));
        atoms.insert(atoms.end(), more.begin(), more.end());
      } catch (const DomainError& e) {
        throw ConfigError(rp, e.what());
      }
      continue;
    }
    allow_keys(a, {"point", "rate"}, p);
    const Vector point = parse_vector(require(a, "point", p), dim, child(p, "point"));
    const double rate = number(require(a, "rate", p), child(p, "rate"));
    if (!(rate > 0.0)) throw ConfigError(child(p, "rate"), "rate must be positive");
    if (point.isZero(0.0)) throw ConfigError(child(p, "point"), "atom must not sit at the origin");
    atoms.push_back({DualVector(point), rate});
  }
  if (atoms.size() > kMaxAtoms) throw ConfigError(pointer, "at most 64 atoms are supported");
  return atoms;
}

EquationConfig equation_from(const json& j, std::size_t dim, const std::string& pointer) {
  allow_keys(j, {"drift", "noise", "initial"}, pointer);
  EquationConfig eq;
  eq.offset = Vector::Zero(static_cast<Eigen::Index>(dim));
  eq.sigma_matrix = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  eq.phi0 = Vector::Zero(static_cast<Eigen::Index>(dim));
  eq.z0 = Vector::Zero(static_cast<Eigen::Index>(dim));
  if (j.contains("drift")) {
    const std::string p = child(pointer, "drift");
    allow_keys(j["drift"], {"beta", "offset"}, p);
    eq.beta = number_or(j["drift"], "beta", 0.0, p);
    if (j["drift"].contains("offset")) eq.offset = parse_vector(j["drift"]["offset"], dim, child(p, "offset"));
  }
  if (j.contains("noise")) {
    const std::string p = child(pointer, "noise");
    allow_keys(j["noise"], {"matrix", "sigma", "phi0"}, p);
    if (j["noise"].contains("matrix")) eq.sigma_matrix = parse_matrix(j["noise"]["matrix"], dim, dim, child(p, "matrix"));
    eq.sigma = number_or(j["noise"], "sigma", 0.0, p);
    if (j["noise"].contains("phi0")) eq.phi0 = parse_vector(j["noise"]["phi0"], dim, child(p, "phi0"));
  }
  if (j.contains("initial")) eq.z0 = parse_vector(j["initial"], dim, child(pointer, "initial"));
  return eq;
}

Matrix covariance_from(const json& j, std::size_t dim, const std::string& pointer) {
  Matrix q = parse_matrix(j, dim, dim, pointer);
  try {
    psd_sqrt(q, "covariance");
  } catch (const std::exception& e) {
    throw ConfigError(pointer, e.what());
  }
  return q;
}

}  // namespace

Vector parse_vector(const json& j, std::size_t dim, const std::string& pointer) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (j.is_number()) return Vector::Constant(d, number(j, pointer));
  if (j.is_array()) {
    if (j.size() != dim)
      throw ConfigError(pointer, "expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
    Vector v(d);
    for (std::size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], child(pointer, i));
    return v;
  }
  if (j.is_object()) {
    allow_keys(j, {"basis", "scale"}, pointer);
    const std::uint64_t b = count(require(j, "basis", pointer), child(pointer, "basis"));
    if (b >= dim) throw ConfigError(child(pointer, "basis"), "basis index out of range");
    Vector v = Vector::Zero(d);
    v(static_cast<Eigen::Index>(b)) = number_or(j, "scale", 1.0, pointer);
    return v;
  }
  throw ConfigError(pointer, "expected a number, an array or {\"basis\": j}");
}

Matrix parse_matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& pointer) {
  const auto r = static_cast<Eigen::Index>(rows), c = static_cast<Eigen::Index>(cols);
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "identity") return Matrix::Identity(r, c);
    if (s == "zero") return Matrix::Zero(r, c);
    throw ConfigError(pointer, "unknown matrix tag '" + s + "'");
  }
  if (j.is_number()) return number(j, pointer) * Matrix::Identity(r, c);
  if (j.is_object()) {
    allow_keys(j, {"diagonal"}, pointer);
    if (rows != cols) throw ConfigError(pointer, "diagonal form needs a square matrix");
    return parse_vector(require(j, "diagonal", pointer), rows, child(pointer, "diagonal")).asDiagonal();
  }
  if (j.is_array()) {
    if (j.size() != rows) throw ConfigError(pointer, "expected " + std::to_string(rows) + " rows");
    Matrix m(r, c);
    for (std::size_t i = 0; i < rows; ++i) m.row(static_cast<Eigen::Index>(i)) = parse_vector(j[i], cols, child(pointer, i));
    return m;
  }
  throw ConfigError(pointer, "expected a matrix");
}

json default_scenario_json() {
  return json::parse(R"({
  "version": "1",
  "space": {"dimension": 8, "weight_exponent": 2},
  "semigroup": {"spectrum": "linear", "shift": 0},
  "noise": {
    "covariance": "identity",
    "atoms": [
      {"point": {"basis": 0, "scale": 1.0}, "rate": 1.0},
      {"point": {"basis": 1, "scale": -0.5}, "rate": 2.0},
      {"point": [0.5, 0.5, 0.5, 0, 0, 0, 0, 0], "rate": 0.5}
    ]
  },
  "grid": {"horizon": 1.0, "steps": 256},
  "ensemble": {"paths": 100000, "pathwise_paths": 1000, "residual_paths": 4000, "seed": 7},
  "picard": {"tol": 1e-10, "max_iter": 50, "damping": "auto", "norm_level": 1},
  "equation": {
    "drift": {"beta": -0.5, "offset": 0},
    "noise": {"matrix": 0.5, "sigma": 0.3, "phi0": {"basis": 0}},
    "initial": [1, 0.5, 0, 0, 0, 0, 0, 0]
  },
  "levy": {
    "covariance": "identity",
    "atoms": [
      {"point": {"basis": 0, "scale": 0.5}, "rate": 2.0},
      {"point": {"basis": 0, "scale": -0.5}, "rate": 2.0},
      {"point": {"basis": 1, "scale": 1.5}, "rate": 0.7},
      {"point": {"basis": 1, "scale": -1.5}, "rate": 0.7},
      {"point": {"basis": 2, "scale": 2.5}, "rate": 0.7},
      {"point": {"basis": 2, "scale": -2.5}, "rate": 0.7}
    ],
    "ball_levels": [0, 0, 0],
    "drift": 0,
    "equation": {
      "drift": {"beta": -0.5, "offset": 0},
      "noise": {"matrix": 0.5, "sigma": 0, "phi0": 0},
      "initial": 0
    }
  },
  "integrands": {
    "weak": [
      {"label": "constant", "name": "constant", "noise": "wiener", "phi": [1, 0.5, 0.25, 0, 0, 0, 0, 0]},
      {"label": "linear-in-time", "name": "linear-in-time", "noise": "wiener", "phi": {"basis": 0}},
      {"label": "simple", "name": "simple", "noise": "full", "blocks": [
        {"s": 0, "t": 0.5, "terms": [
          {"wiener": true, "atoms": [0], "phi": [1, 0, 0, 0, 0, 0, 0, 0]},
          {"wiener": false, "atoms": [1, 2], "phi": [0, 1, 0.5, 0, 0, 0, 0, 0]}]},
        {"s": 0.5, "t": 1, "event": {"type": "wiener-sign", "observe": {"basis": 0}, "positive": true, "probability": 0.5},
         "terms": [{"wiener": true, "atoms": [0, 1, 2], "phi": [0.5, 0.5, 0, 0, 0, 0, 0, 0]}]},
        {"s": 0.5, "t": 1, "event": {"type": "wiener-sign", "observe": {"basis": 0}, "positive": false, "probability": 0.5},
         "terms": [{"wiener": true, "atoms": [], "phi": [0, 0, 1, 0, 0, 0, 0, 0]}]}]},
      {"label": "jump", "name": "affine-in-time", "noise": "jumps",
       "jumps": {"per_atom": [{"basis": 0}, {"basis": 1}, [1, 0, 1, 0, 0, 0, 0, 0]], "offset": 1, "slope": 1}},
      {"label": "mixed", "name": "constant", "noise": "full", "phi": [1, -0.5, 0.5, 0, 0, 0, 0, 0]},
      {"label": "two-seminorm", "name": "affine-in-time", "noise": "full",
       "wiener": {"phi": {"basis": 1}, "offset": 0, "slope": 1},
       "jumps": {"phi": [1, 0, 0.5, 0, 0, 0, 0, 0], "offset": 1, "slope": 0}}
    ],
    "operator": [
      {"label": "identity", "name": "identity"},
      {"label": "diagonal", "name": "diagonal", "constant": 1, "slope": [1, 0.5, 0, 0, 0, 0, 0, 0.25]},
      {"label": "rank1", "name": "rank1", "psi0": [1, 1, 0, 0, 0, 0, 0, 0], "phi0": [0.5, 0, 1, 0, 0, 0, 0, 0], "slope": -0.5},
      {"label": "state-feedback", "name": "state-feedback", "observe": {"basis": 0}, "gain": 0.5},
      {"label": "random", "name": "matrix", "seed": 11, "scale": 0.5}
    ]
  }
})");
}

Scenario default_scenario() { return parse_scenario(default_scenario_json()); }

Scenario parse_scenario(const json& j) {
  if (!j.is_object()) throw ConfigError("", "scenario must be a JSON object");
  allow_keys(j, {"version", "space", "semigroup", "noise", "grid", "ensemble", "picard", "equation", "levy", "integrands"},
             "");
  Scenario s;
  s.version = text_or(j, "version", "1", "");
  if (s.version != "1") throw ConfigError("/version", "unsupported version '" + s.version + "'");

  if (j.contains("space")) {
    allow_keys(j["space"], {"dimension", "weight_exponent"}, "/space");
    s.dim = count_or(j["space"], "dimension", 8, "/space");
    if (s.dim == 0) throw ConfigError("/space/dimension", "dimension must be positive");
    s.weight_exponent = number_or(j["space"], "weight_exponent", 2.0, "/space");
    if (s.weight_exponent < 0.0) throw ConfigError("/space/weight_exponent", "exponent must be nonnegative");
  }
  const std::size_t d = s.dim;

  s.spectrum = DiagonalSemigroup::from_tag("linear", d).spectrum();
  if (j.contains("semigroup")) {
    allow_keys(j["semigroup"], {"spectrum", "shift"}, "/semigroup");
    if (j["semigroup"].contains("spectrum")) s.spectrum = spectrum_from(j["semigroup"]["spectrum"], d, "/semigroup/spectrum");
    s.shift = number_or(j["semigroup"], "shift", 0.0, "/semigroup");
    if (s.shift < 0.0) throw ConfigError("/semigroup/shift", "shift must be nonnegative");
  }

  s.q = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (j.contains("noise")) {
    allow_keys(j["noise"], {"covariance", "atoms"}, "/noise");
    if (j["noise"].contains("covariance")) s.q = covariance_from(j["noise"]["covariance"], d, "/noise/covariance");
    if (j["noise"].contains("atoms")) s.atoms = atoms_from(j["noise"]["atoms"], d, "/noise/atoms");
  }

  if (j.contains("grid")) {
    allow_keys(j["grid"], {"horizon", "steps"}, "/grid");
    s.horizon = number_or(j["grid"], "horizon", 1.0, "/grid");
    if (!(s.horizon > 0.0)) throw ConfigError("/grid/horizon", "horizon must be positive");
    s.steps = count_or(j["grid"], "steps", 256, "/grid");
    if (s.steps == 0) throw ConfigError("/grid/steps", "steps must be positive");
  }

  if (j.contains("ensemble")) {
    allow_keys(j["ensemble"], {"paths", "pathwise_paths", "residual_paths", "seed"}, "/ensemble");
    s.paths = count_or(j["ensemble"], "paths", s.paths, "/ensemble");
    s.pathwise_paths = count_or(j["ensemble"], "pathwise_paths", s.pathwise_paths, "/ensemble");
    s.residual_paths = count_or(j["ensemble"], "residual_paths", s.residual_paths, "/ensemble");
    s.seed = count_or(j["ensemble"], "seed", s.seed, "/ensemble");
    if (s.paths < 2) throw ConfigError("/ensemble/paths", "need at least two paths");
    if (s.pathwise_paths < 2) throw ConfigError("/ensemble/pathwise_paths", "need at least two paths");
    if (s.residual_paths < 2) throw ConfigError("/ensemble/residual_paths", "need at least two paths");
  }

  if (j.contains("picard")) {
    const json& p = j["picard"];
    allow_keys(p, {"tol", "max_iter", "damping", "norm_level"}, "/picard");
    s.picard.tol = number_or(p, "tol", s.picard.tol, "/picard");
    if (!(s.picard.tol > 0.0)) throw ConfigError("/picard/tol", "tolerance must be positive");
    s.picard.max_iter = static_cast<unsigned>(count_or(p, "max_iter", s.picard.max_iter, "/picard"));
    s.picard.norm_level = static_cast<unsigned>(count_or(p, "norm_level", s.picard.norm_level, "/picard"));
    if (p.contains("damping") && !(p["damping"].is_string() && p["damping"] == "auto")) {
      s.picard.damping = number(p["damping"], "/picard/damping");
      if (*s.picard.damping < 0.0) throw ConfigError("/picard/damping", "damping must be nonnegative or \"auto\"");
    }
  }

  s.equation = equation_from(j.value("equation", json::object()), d, "/equation");

  s.levy.q = s.q;
  s.levy.drift = Vector::Zero(static_cast<Eigen::Index>(d));
  s.levy.ball_levels = {0};
  s.levy.equation = s.equation;
  s.levy.atoms = s.atoms;
  if (j.contains("levy")) {
    const json& l = j["levy"];
    allow_keys(l, {"covariance", "atoms", "ball_levels", "drift", "equation"}, "/levy");
    if (l.contains("covariance")) s.levy.q = covariance_from(l["covariance"], d, "/levy/covariance");
    if (l.contains("atoms")) s.levy.atoms = atoms_from(l["atoms"], d, "/levy/atoms");
    if (l.contains("ball_levels")) {
      const json& b = l["ball_levels"];
      if (!b.is_array() || b.empty()) throw ConfigError("/levy/ball_levels", "expected a nonempty array");
      s.levy.ball_levels.clear();
      for (std::size_t i = 0; i < b.size(); ++i)
        s.levy.ball_levels.push_back(static_cast<unsigned>(count(b[i], child("/levy/ball_levels", i))));
    }
    if (l.contains("drift")) s.levy.drift = parse_vector(l["drift"], d, "/levy/drift");
    if (l.contains("equation")) s.levy.equation = equation_from(l["equation"], d, "/levy/equation");
  }

  const json defaults = default_scenario_json()["integrands"];
  s.isometry_integrands = defaults["weak"];
  s.strong_integrands = defaults["operator"];
  if (j.contains("integrands")) {
    allow_keys(j["integrands"], {"weak", "operator"}, "/integrands");
    if (j["integrands"].contains("weak")) s.isometry_integrands = j["integrands"]["weak"];
    if (j["integrands"].contains("operator")) s.strong_integrands = j["integrands"]["operator"];
  }
  if (!s.isometry_integrands.is_array()) throw ConfigError("/integrands/weak", "expected an array");
  if (!s.strong_integrands.is_array()) throw ConfigError("/integrands/operator", "expected an array");
  // Resolve every name now so a bad entry fails at load time.
  for (std::size_t i = 0; i < s.isometry_integrands.size(); ++i)
    make_weak_integrand(s.isometry_integrands[i], d, child("/integrands/weak", i));
  for (std::size_t i = 0; i < s.strong_integrands.size(); ++i)
    make_operator_integrand(s.strong_integrands[i], d, child("/integrands/operator", i));

  try {
    (void)s.spec();
    (void)s.levy_triplet();
  } catch (const std::exception& e) {
    throw ConfigError("/noise", e.what());
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

MvmSpec Scenario::spec() const { return MvmSpec(q, LevyMeasure(dim, atoms)); }

std::shared_ptr<const TimeGrid> Scenario::grid() const { return grid(steps); }

std::shared_ptr<const TimeGrid> Scenario::grid(std::size_t steps_override) const {
  return std::make_shared<const TimeGrid>(TimeGrid::uniform(horizon, steps_override));
}

Coefficients Scenario::coefficients(const EquationConfig& eq, const MvmSpec& noise) const {
  return linear_coefficients(dim, eq.beta, DualVector(eq.offset), eq.sigma_matrix, eq.sigma, TestFunction(eq.phi0), noise);
}

LevyTriplet Scenario::levy_triplet() const {
  return LevyTriplet{DualVector(levy.drift), MvmSpec(levy.q, LevyMeasure(dim, levy.atoms)), levy.ball_levels.front(),
                     1.0};
}

MvmSpec noise_for(const std::string& selector, const MvmSpec& full) {
  const auto d = static_cast<Eigen::Index>(full.dim());
  if (selector == "full") return full;
  if (selector == "wiener") return MvmSpec(full.covariance(), LevyMeasure(full.dim(), {}));
  if (selector == "jumps") return MvmSpec(Matrix::Zero(d, d), full.levy(), full.domain());
  throw DomainError("unknown noise selector '" + selector + "'");
}

namespace {

Event event_from(const json& j, std::size_t dim, const std::string& pointer, std::optional<double>& probability) {
  allow_keys(j, {"type", "observe", "positive", "probability", "time"}, pointer);
  const std::string type = text(require(j, "type", pointer), child(pointer, "type"));
  if (j.contains("probability")) {
    probability = number(j["probability"], child(pointer, "probability"));
    if (*probability < 0.0 || *probability > 1.0) throw ConfigError(child(pointer, "probability"), "outside [0,1]");
  }
  if (type == "wiener-sign") {
    const TestFunction obs(parse_vector(require(j, "observe", pointer), dim, child(pointer, "observe")));
    const bool positive = j.value("positive", true);
    return [obs, positive](const History& h) { return (h.wiener_now().dot(obs.coeffs()) > 0.0) == positive; };
  }
  throw ConfigError(child(pointer, "type"), "unknown event type '" + type + "'");
}

struct AffineSpec {
  std::vector<TestFunction> per_atom;  // empty: single phi for every mark
  TestFunction phi;
  double offset = 1.0;
  double slope = 0.0;
};

AffineSpec affine_from(const json& j, std::size_t dim, const std::string& pointer) {
  allow_keys(j, {"phi", "per_atom", "offset", "slope"}, pointer);
  AffineSpec a;
  a.phi = TestFunction::zero(dim);
  if (j.contains("phi")) a.phi = TestFunction(parse_vector(j["phi"], dim, child(pointer, "phi")));
  if (j.contains("per_atom")) {
    if (!j["per_atom"].is_array()) throw ConfigError(child(pointer, "per_atom"), "expected an array");
    for (std::size_t i = 0; i < j["per_atom"].size(); ++i)
      a.per_atom.emplace_back(parse_vector(j["per_atom"][i], dim, child(child(pointer, "per_atom"), i)));
  }
  a.offset = number_or(j, "offset", 1.0, pointer);
  a.slope = number_or(j, "slope", 0.0, pointer);
  return a;
}

TestFunction affine_value(const AffineSpec& a, double r, std::size_t atom) {
  const double f = a.offset + a.slope * r;
  if (a.per_atom.empty()) return f * a.phi;
  if (atom >= a.per_atom.size()) return TestFunction::zero(a.phi.dim());
  return f * a.per_atom[atom];
}

}  // namespace

WeakIntegrandEntry make_weak_integrand(const json& j, std::size_t dim, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer, "expected an object");
  WeakIntegrandEntry e;
  e.name = text(require(j, "name", pointer), child(pointer, "name"));
  e.label = text_or(j, "label", e.name, pointer);
  e.noise = text_or(j, "noise", "full", pointer);
  if (e.noise != "full" && e.noise != "wiener" && e.noise != "jumps")
    throw ConfigError(child(pointer, "noise"), "expected wiener, jumps or full");

  if (e.name == "constant" || e.name == "linear-in-time") {
    allow_keys(j, {"label", "name", "noise", "phi", "jump_phi"}, pointer);
    const TestFunction phi(parse_vector(require(j, "phi", pointer), dim, child(pointer, "phi")));
    const TestFunction jphi = j.contains("jump_phi") ? TestFunction(parse_vector(j["jump_phi"], dim, child(pointer, "jump_phi"))) : phi;
    const bool linear = e.name == "linear-in-time";
    e.deterministic = [phi, jphi, linear](double r, const MarkView& m) {
      const double f = linear ? r : 1.0;
      return f * (m.wiener() ? phi : jphi);
    };
  } else if (e.name == "affine-in-time") {
    allow_keys(j, {"label", "name", "noise", "wiener", "jumps"}, pointer);
    AffineSpec w{{}, TestFunction::zero(dim), 0.0, 0.0}, u{{}, TestFunction::zero(dim), 0.0, 0.0};
    if (j.contains("wiener")) w = affine_from(j["wiener"], dim, child(pointer, "wiener"));
    if (j.contains("jumps")) u = affine_from(j["jumps"], dim, child(pointer, "jumps"));
    e.deterministic = [w, u](double r, const MarkView& m) {
      return m.wiener() ? affine_value(w, r, 0) : affine_value(u, r, m.atom);
    };
  } else if (e.name == "state-feedback" || e.name == "exp-local") {
    allow_keys(j, {"label", "name", "noise", "phi", "observe", "gain"}, pointer);
    const TestFunction phi(parse_vector(require(j, "phi", pointer), dim, child(pointer, "phi")));
    const TestFunction obs(parse_vector(require(j, "observe", pointer), dim, child(pointer, "observe")));
    const double gain = number_or(j, "gain", 1.0, pointer);
    if (e.name == "state-feedback") {
      e.integrand = {[phi, obs, gain](const Instant&, const History& h, const MarkView&) {
                       return (1.0 + gain * std::tanh(h.wiener_now().dot(obs.coeffs()))) * phi;
                     },
                     MomentClass::square};
    } else {
      e.integrand = {[phi, obs, gain](const Instant&, const History& h, const MarkView&) {
                       return std::exp(gain * h.wiener_now().dot(obs.coeffs())) * phi;
                     },
                     MomentClass::local};
    }
    return e;
  } else if (e.name == "simple") {
    allow_keys(j, {"label", "name", "noise", "blocks"}, pointer);
    const json& bl = require(j, "blocks", pointer);
    if (!bl.is_array()) throw ConfigError(child(pointer, "blocks"), "expected an array");
    std::vector<SimpleBlock> blocks;
    for (std::size_t i = 0; i < bl.size(); ++i) {
      const std::string bp = child(child(pointer, "blocks"), i);
      allow_keys(bl[i], {"s", "t", "event", "terms"}, bp);
      SimpleBlock b;
      b.s = number(require(bl[i], "s", bp), child(bp, "s"));
      b.t = number(require(bl[i], "t", bp), child(bp, "t"));
      if (bl[i].contains("event")) b.event = event_from(bl[i]["event"], dim, child(bp, "event"), b.probability);
      const json& terms = require(bl[i], "terms", bp);
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const std::string tp = child(child(bp, "terms"), k);
        allow_keys(terms[k], {"wiener", "atoms", "phi"}, tp);
        SimpleTerm term;
        term.set.zero = terms[k].value("wiener", false);
        if (terms[k].contains("atoms"))
          for (std::size_t a = 0; a < terms[k]["atoms"].size(); ++a) {
            const auto idx = count(terms[k]["atoms"][a], child(child(tp, "atoms"), a));
            if (idx >= kMaxAtoms) throw ConfigError(child(child(tp, "atoms"), a), "atom index out of range");
            term.set.atoms |= atom_bit(idx);
          }
        term.phi = TestFunction(parse_vector(require(terms[k], "phi", tp), dim, child(tp, "phi")));
        b.terms.push_back(std::move(term));
      }
      blocks.push_back(std::move(b));
    }
    try {
      e.simple.emplace(dim, std::move(blocks));
    } catch (const std::exception& ex) {
      throw ConfigError(child(pointer, "blocks"), ex.what());
    }
    e.integrand = e.simple->as_weak();
    return e;
  } else {
    throw ConfigError(child(pointer, "name"), "unknown weak integrand '" + e.name + "'");
  }
  e.integrand = deterministic_integrand(e.deterministic);
  return e;
}

OperatorIntegrandEntry make_operator_integrand(const json& j, std::size_t dim, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError(pointer, "expected an object");
  OperatorIntegrandEntry e;
  e.name = text(require(j, "name", pointer), child(pointer, "name"));
  e.label = text_or(j, "label", e.name, pointer);
  const auto d = static_cast<Eigen::Index>(dim);
  if (e.name == "identity") {
    allow_keys(j, {"label", "name"}, pointer);
    e.deterministic = [d](double, const MarkView&) -> Matrix { return Matrix::Identity(d, d); };
  } else if (e.name == "diagonal") {
    allow_keys(j, {"label", "name", "constant", "slope"}, pointer);
    const Vector c = j.contains("constant") ? parse_vector(j["constant"], dim, child(pointer, "constant")) : Vector::Ones(d);
    const Vector s = j.contains("slope") ? parse_vector(j["slope"], dim, child(pointer, "slope")) : Vector::Zero(d);
    e.deterministic = [c, s](double r, const MarkView&) -> Matrix { return (c + r * s).asDiagonal(); };
  } else if (e.name == "rank1") {
    allow_keys(j, {"label", "name", "psi0", "phi0", "slope"}, pointer);
    const Vector psi0 = parse_vector(require(j, "psi0", pointer), dim, child(pointer, "psi0"));
    const Vector phi0 = parse_vector(require(j, "phi0", pointer), dim, child(pointer, "phi0"));
    const double slope = number_or(j, "slope", 0.0, pointer);
    e.deterministic = [psi0, phi0, slope](double r, const MarkView&) -> Matrix {
      return (1.0 + slope * r) * psi0 * phi0.transpose();
    };
  } else if (e.name == "matrix") {
    allow_keys(j, {"label", "name", "seed", "scale"}, pointer);
    const std::uint64_t seed = count_or(j, "seed", 1, pointer);
    const double scale = number_or(j, "scale", 1.0, pointer);
    Philox4x32 gen(seed, 0, StreamTag::samples, 1);
    std::normal_distribution<double> normal;
    Matrix m(d, d);
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index r = 0; r < d; ++r) m(r, c) = scale * normal(gen);
    e.deterministic = [m](double, const MarkView&) -> Matrix { return m; };
  } else if (e.name == "state-feedback") {
    allow_keys(j, {"label", "name", "observe", "gain"}, pointer);
    const Vector obs = parse_vector(require(j, "observe", pointer), dim, child(pointer, "observe"));
    const double gain = number_or(j, "gain", 1.0, pointer);
    e.integrand = {[obs, gain, d](const Instant&, const History& h, const MarkView&) -> Matrix {
                     return (1.0 + gain * std::tanh(h.wiener_now().dot(obs))) * Matrix::Identity(d, d);
                   },
                   MomentClass::square, dim, dim};
    return e;
  } else {
    throw ConfigError(child(pointer, "name"), "unknown operator integrand '" + e.name + "'");
  }
  e.integrand = deterministic_operator(dim, dim, e.deterministic);
  return e;
}

}  // namespace nucspde
