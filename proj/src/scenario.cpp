#include "imelab/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace imelab {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw ValidationError("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      parse_fail(where, "unknown key \"" + it.key() + "\"");
  }
}

double need_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) parse_fail(where, "missing \"" + key + "\"");
  if (!obj[key].is_number()) parse_fail(where + "." + key, "expected a number");
  return obj[key].get<double>();
}

std::vector<double> number_list(const json& arr, const std::string& where) {
  if (!arr.is_array()) parse_fail(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : arr) {
    if (!v.is_number()) parse_fail(where, "expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::array<double, 4>> tuple_list(const json& arr, const std::string& where) {
  if (!arr.is_array()) parse_fail(where, "expected an array of 4-tuples");
  std::vector<std::array<double, 4>> out;
  for (const auto& v : arr) {
    const std::vector<double> t = number_list(v, where);
    if (t.size() != 4) parse_fail(where, "each entry must be (row, col, re, im)");
    out.push_back({t[0], t[1], t[2], t[3]});
  }
  return out;
}

}  // namespace

std::string analysis_name(Analysis a) {
  switch (a) {
    case Analysis::kSpectrum: return "spectrum";
    case Analysis::kAbmd: return "abmd";
    case Analysis::kHdSweep: return "hd-sweep";
    case Analysis::kOptimizeIme: return "optimize-ime";
    case Analysis::kDecompose: return "decompose";
    case Analysis::kVerify: return "verify";
  }
  return "spectrum";
}

Analysis analysis_from_name(const std::string& name) {
  if (name == "spectrum") return Analysis::kSpectrum;
  if (name == "abmd") return Analysis::kAbmd;
  if (name == "hd-sweep") return Analysis::kHdSweep;
  if (name == "optimize-ime") return Analysis::kOptimizeIme;
  if (name == "decompose") return Analysis::kDecompose;
  if (name == "verify") return Analysis::kVerify;
  throw ValidationError("config: unknown analysis \"" + name + "\"");
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ValidationError(std::string("config: JSON parse error: ") + err.what());
  }
  if (!root.is_object()) parse_fail("root", "expected an object");
  check_keys(root,
             {"name", "analysis", "system", "grid", "lo", "target_index", "ime",
              "sweep", "optimize", "decompose", "verify"},
             "root");

  ScenarioConfig cfg;
  if (root.contains("name")) cfg.name = root["name"].get<std::string>();
  if (root.contains("analysis"))
    cfg.analysis = analysis_from_name(root["analysis"].get<std::string>());

  if (!root.contains("system")) parse_fail("root", "missing \"system\"");
  {
    const json& sys = root["system"];
    check_keys(sys, {"n_modes", "gamma", "g", "f"}, "system");
    cfg.n_modes = static_cast<int>(need_number(sys, "n_modes", "system"));
    if (!sys.contains("gamma")) parse_fail("system", "missing \"gamma\"");
    cfg.gamma = number_list(sys["gamma"], "system.gamma");
    if (sys.contains("g")) cfg.g_entries = tuple_list(sys["g"], "system.g");
    if (sys.contains("f")) cfg.f_entries = tuple_list(sys["f"], "system.f");
  }

  if (root.contains("grid")) {
    const json& grid = root["grid"];
    check_keys(grid, {"max", "points"}, "grid");
    if (grid.contains("max")) cfg.grid_max = need_number(grid, "max", "grid");
    if (grid.contains("points"))
      cfg.grid_points = static_cast<int>(need_number(grid, "points", "grid"));
  }

  if (root.contains("lo")) {
    const json& lo = root["lo"];
    check_keys(lo, {"angles"}, "lo");
    if (lo.contains("angles")) cfg.lo_angles = number_list(lo["angles"], "lo.angles");
  }
  if (root.contains("target_index"))
    cfg.target_index = static_cast<int>(need_number(root, "target_index", "root"));

  if (root.contains("ime")) {
    const json& ime = root["ime"];
    check_keys(ime, {"stages"}, "ime");
    if (!ime.contains("stages") || !ime["stages"].is_array())
      parse_fail("ime", "missing \"stages\" array");
    for (const auto& stage : ime["stages"]) {
      check_keys(stage, {"gamma", "detunings", "couplings"}, "ime.stages[]");
      StageConfig sc;
      if (!stage.contains("gamma")) parse_fail("ime.stages[]", "missing \"gamma\"");
      sc.gamma = number_list(stage["gamma"], "ime.stages[].gamma");
      if (stage.contains("detunings"))
        sc.detunings = number_list(stage["detunings"], "ime.stages[].detunings");
      if (stage.contains("couplings"))
        sc.couplings = tuple_list(stage["couplings"], "ime.stages[].couplings");
      cfg.ime_stages.push_back(std::move(sc));
    }
  }

  if (root.contains("sweep")) {
    const json& sweep = root["sweep"];
    check_keys(sweep, {"resolution_deg", "lo_list"}, "sweep");
    SweepConfig sc;
    if (sweep.contains("resolution_deg"))
      sc.resolution_deg = need_number(sweep, "resolution_deg", "sweep");
    if (sweep.contains("lo_list")) {
      if (!sweep["lo_list"].is_array()) parse_fail("sweep.lo_list", "expected array");
      for (const auto& angles : sweep["lo_list"])
        sc.lo_list.push_back(number_list(angles, "sweep.lo_list[]"));
    }
    cfg.sweep = std::move(sc);
  }

  if (root.contains("optimize")) {
    const json& opt = root["optimize"];
    check_keys(opt,
               {"stages", "equal_damping", "band", "objective", "seed", "starts",
                "tol_db", "max_iterations", "warm_starts"},
               "optimize");
    OptimizeConfig oc;
    if (opt.contains("stages"))
      oc.stages = static_cast<int>(need_number(opt, "stages", "optimize"));
    if (opt.contains("equal_damping")) oc.equal_damping = opt["equal_damping"].get<bool>();
    if (opt.contains("band")) {
      const std::vector<double> band = number_list(opt["band"], "optimize.band");
      if (band.size() != 2) parse_fail("optimize.band", "expected [lo, hi]");
      oc.band = Band{band[0], band[1]};
    }
    if (opt.contains("objective")) oc.objective = opt["objective"].get<std::string>();
    if (opt.contains("seed")) {
      oc.seed = opt["seed"].get<std::uint64_t>();
      oc.seed_given = true;
    }
    if (opt.contains("starts"))
      oc.starts = static_cast<int>(need_number(opt, "starts", "optimize"));
    if (opt.contains("tol_db")) oc.tol_db = need_number(opt, "tol_db", "optimize");
    if (opt.contains("max_iterations"))
      oc.max_iterations = static_cast<int>(need_number(opt, "max_iterations", "optimize"));
    if (opt.contains("warm_starts")) {
      for (const auto& w : opt["warm_starts"])
        oc.warm_starts.push_back(number_list(w, "optimize.warm_starts[]"));
    }
    cfg.optimize = std::move(oc);
  }

  if (root.contains("decompose")) {
    const json& dec = root["decompose"];
    check_keys(dec, {"ordering", "mzi", "cavity_fit", "band", "seed"}, "decompose");
    DecomposeConfig dc;
    if (dec.contains("ordering")) dc.ordering = dec["ordering"].get<std::string>();
    if (dc.ordering != "triangular" && dc.ordering != "rectangular")
      parse_fail("decompose.ordering", "expected \"triangular\" or \"rectangular\"");
    if (dec.contains("mzi")) dc.mzi = dec["mzi"].get<bool>();
    if (dec.contains("cavity_fit"))
      dc.cavity_fit = static_cast<int>(need_number(dec, "cavity_fit", "decompose"));
    if (dec.contains("band")) {
      const std::vector<double> band = number_list(dec["band"], "decompose.band");
      if (band.size() != 2) parse_fail("decompose.band", "expected [lo, hi]");
      dc.band = Band{band[0], band[1]};
    } else {
      dc.band = Band{-cfg.grid_max, cfg.grid_max};
    }
    if (dec.contains("seed")) dc.seed = dec["seed"].get<std::uint64_t>();
    cfg.decompose = std::move(dc);
  }

  if (root.contains("verify")) {
    const json& ver = root["verify"];
    check_keys(ver, {"netlist"}, "verify");
    if (ver.contains("netlist")) cfg.verify_netlist = ver["netlist"].get<std::string>();
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

std::string ScenarioConfig::to_json_text() const {
  json root;
  root["name"] = name;
  root["analysis"] = analysis_name(analysis);
  json sys;
  sys["n_modes"] = n_modes;
  sys["gamma"] = gamma;
  if (!g_entries.empty()) sys["g"] = g_entries;
  if (!f_entries.empty()) sys["f"] = f_entries;
  root["system"] = sys;
  root["grid"] = json{{"max", grid_max}, {"points", grid_points}};
  if (!lo_angles.empty()) root["lo"] = json{{"angles", lo_angles}};
  if (target_index != 0) root["target_index"] = target_index;
  if (!ime_stages.empty()) {
    json stages = json::array();
    for (const auto& sc : ime_stages) {
      json stage;
      stage["gamma"] = sc.gamma;
      if (!sc.detunings.empty()) stage["detunings"] = sc.detunings;
      if (!sc.couplings.empty()) stage["couplings"] = sc.couplings;
      stages.push_back(stage);
    }
    root["ime"] = json{{"stages", stages}};
  }
  if (sweep) {
    json sc;
    sc["resolution_deg"] = sweep->resolution_deg;
    if (!sweep->lo_list.empty()) sc["lo_list"] = sweep->lo_list;
    root["sweep"] = sc;
  }
  if (optimize) {
    json oc;
    oc["stages"] = optimize->stages;
    oc["equal_damping"] = optimize->equal_damping;
    oc["band"] = std::vector<double>{optimize->band.lo, optimize->band.hi};
    oc["objective"] = optimize->objective;
    if (optimize->seed_given) oc["seed"] = optimize->seed;
    oc["starts"] = optimize->starts;
    oc["tol_db"] = optimize->tol_db;
    oc["max_iterations"] = optimize->max_iterations;
    if (!optimize->warm_starts.empty()) oc["warm_starts"] = optimize->warm_starts;
    root["optimize"] = oc;
  }
  if (decompose) {
    json dc;
    dc["ordering"] = decompose->ordering;
    dc["mzi"] = decompose->mzi;
    dc["cavity_fit"] = decompose->cavity_fit;
    dc["band"] = std::vector<double>{decompose->band.lo, decompose->band.hi};
    dc["seed"] = decompose->seed;
    root["decompose"] = dc;
  }
  if (!verify_netlist.empty()) root["verify"] = json{{"netlist", verify_netlist}};
  return root.dump(2) + "\n";
}

QuadraticSystem ScenarioConfig::build_system() const {
  const int n = n_modes;
  if (n < 1) throw ValidationError("config: system.n_modes must be >= 1");
  if (static_cast<int>(gamma.size()) != n)
    throw ValidationError("config: system.gamma length must equal n_modes");
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(n, n);
  Eigen::MatrixXd g_given = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd f_given = Eigen::MatrixXd::Zero(n, n);
  auto fill = [&](const std::vector<std::array<double, 4>>& entries, Eigen::MatrixXcd& m,
                  Eigen::MatrixXd& given, const char* label) {
    for (const auto& e : entries) {
      const int r = static_cast<int>(e[0]) - 1;
      const int c = static_cast<int>(e[1]) - 1;
      if (r < 0 || r >= n || c < 0 || c >= n) {
        std::ostringstream msg;
        msg << "config: system." << label << " entry (" << e[0] << ", " << e[1]
            << ") out of range";
        throw ValidationError(msg.str());
      }
      m(r, c) = Complex(e[2], e[3]);
      given(r, c) = 1.0;
    }
  };
  fill(g_entries, g, g_given, "g");
  fill(f_entries, f, f_given, "f");
  // Fill the unlisted triangle by Hermitian / symmetric completion; entries
  // listed on both sides are kept verbatim so inconsistencies surface in
  // validation.
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (g_given(r, c) != 0.0 && g_given(c, r) == 0.0 && r != c) g(c, r) = std::conj(g(r, c));
      if (f_given(r, c) != 0.0 && f_given(c, r) == 0.0 && r != c) f(c, r) = f(r, c);
    }
  }
  Eigen::VectorXd gam(n);
  for (int i = 0; i < n; ++i) gam(i) = gamma[static_cast<std::size_t>(i)];
  return QuadraticSystem::make(std::move(g), std::move(f), std::move(gam));
}

FrequencyGrid ScenarioConfig::build_grid() const {
  return FrequencyGrid::uniform_symmetric(grid_max, grid_points);
}

ImeChain ScenarioConfig::build_chain() const {
  if (ime_stages.empty()) throw ValidationError("config: ime.stages is empty");
  ImeChain chain;
  const int n = n_modes;
  for (const auto& sc : ime_stages) {
    Eigen::VectorXd gam(n);
    if (static_cast<int>(sc.gamma.size()) == 1) {
      gam.setConstant(sc.gamma[0]);
    } else if (static_cast<int>(sc.gamma.size()) == n) {
      for (int i = 0; i < n; ++i) gam(i) = sc.gamma[static_cast<std::size_t>(i)];
    } else {
      throw ValidationError("config: ime stage gamma must have 1 or N entries");
    }
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
    if (!sc.detunings.empty()) {
      if (static_cast<int>(sc.detunings.size()) != n)
        throw ValidationError("config: ime stage detunings must have N entries");
      for (int i = 0; i < n; ++i) g(i, i) = sc.detunings[static_cast<std::size_t>(i)];
    }
    for (const auto& e : sc.couplings) {
      const int m = static_cast<int>(e[0]) - 1;
      const int j = static_cast<int>(e[1]) - 1;
      if (m < 0 || m >= n || j < 0 || j >= n || m == j)
        throw ValidationError("config: ime coupling indices out of range");
      const double theta = e[2], phi = e[3];
      g(m, j) = theta * std::exp(Complex(0.0, -phi));
      g(j, m) = theta * std::exp(Complex(0.0, phi));
    }
    chain.stages.push_back(ImeStage::make(std::move(g), std::move(gam)));
  }
  return chain;
}

int ScenarioConfig::resolved_target_index() const {
  if (target_index == 0) return n_modes + 1;
  if (target_index < 1 || target_index > 2 * n_modes)
    throw ValidationError("config: target_index out of range [1, 2N]");
  return target_index;
}

// ---------------------------------------------------------------------------
// Writers.

std::string format_sig(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  return out;
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

}  // namespace

void write_noise_csv(const std::string& path, const NoiseSpectrum& spectrum) {
  std::ofstream out = open_out(path);
  out << "omega,linear,db\n";
  for (int k = 0; k < spectrum.grid.size(); ++k)
    out << format_sig(spectrum.grid.at(k)) << ","
        << format_sig(spectrum.values[static_cast<std::size_t>(k)]) << ","
        << format_sig(spectrum.db[static_cast<std::size_t>(k)]) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void write_netlist(const std::string& path, const MeshNetlist& netlist,
                   const NetlistReport& report) {
  std::ofstream out = open_out(path);
  out << "imelab-netlist v1\n";
  out << "ordering " << (netlist.ordering == MeshOrdering::kTriangular ? "triangular"
                                                                        : "rectangular")
      << "\n";
  out << "modes " << netlist.n_modes << "\n";
  out << "points " << netlist.grid.size() << "\n";
  out << "factors " << netlist.factor_count() << "\n";
  for (int f = 0; f < netlist.factor_count(); ++f) {
    const TwoLevelFactor& factor = netlist.factors[static_cast<std::size_t>(f)];
    out << "factor " << f + 1 << " modes " << factor.m + 1 << " " << factor.n + 1 << "\n";
    out << "omega re_a im_a re_b im_b phi\n";
    for (int k = 0; k < netlist.grid.size(); ++k) {
      const std::size_t i = static_cast<std::size_t>(k);
      out << format_sig(netlist.grid.at(k)) << " " << format_sig(factor.a[i].real())
          << " " << format_sig(factor.a[i].imag()) << " " << format_sig(factor.b[i].real())
          << " " << format_sig(factor.b[i].imag()) << " " << format_sig(factor.phi[i])
          << "\n";
    }
  }
  out << "residual\n";
  out << "omega";
  for (int m = 1; m <= netlist.n_modes; ++m) out << " phi_" << m;
  out << "\n";
  for (int k = 0; k < netlist.grid.size(); ++k) {
    out << format_sig(netlist.grid.at(k));
    for (int m = 0; m < netlist.n_modes; ++m)
      out << " " << format_sig(netlist.residual_phases(k, m));
    out << "\n";
  }
  out << "verification max_error=" << format_sig(report.max_error)
      << " factor_count=" << report.factor_count
      << " smoothness=" << format_sig(report.smoothness)
      << " det_error=" << format_sig(report.det_error)
      << " max_residual_phase=" << format_sig(report.max_residual_phase) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

MeshNetlist read_netlist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open netlist file: " + path);
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ValidationError("netlist: truncated file " + path);
    return line;
  };
  if (next_line() != "imelab-netlist v1")
    throw ValidationError("netlist: unrecognized header in " + path);

  MeshNetlist netlist;
  std::string word, ordering;
  {
    std::istringstream ls(next_line());
    ls >> word >> ordering;
    if (word != "ordering") throw ValidationError("netlist: expected ordering line");
    netlist.ordering = ordering == "triangular" ? MeshOrdering::kTriangular
                                                : MeshOrdering::kRectangular;
  }
  int points = 0, factor_count = 0;
  {
    std::istringstream ls(next_line());
    ls >> word >> netlist.n_modes;
    if (word != "modes") throw ValidationError("netlist: expected modes line");
  }
  {
    std::istringstream ls(next_line());
    ls >> word >> points;
    if (word != "points") throw ValidationError("netlist: expected points line");
  }
  {
    std::istringstream ls(next_line());
    ls >> word >> factor_count;
    if (word != "factors") throw ValidationError("netlist: expected factors line");
  }
  std::vector<double> omegas;
  for (int f = 0; f < factor_count; ++f) {
    TwoLevelFactor factor;
    {
      std::istringstream ls(next_line());
      int index = 0, m = 0, n = 0;
      ls >> word >> index >> word >> m >> n;
      factor.m = m - 1;
      factor.n = n - 1;
    }
    next_line();  // column header
    for (int k = 0; k < points; ++k) {
      std::istringstream ls(next_line());
      double w, ar, ai, br, bi, phi;
      if (!(ls >> w >> ar >> ai >> br >> bi >> phi))
        throw ValidationError("netlist: bad factor sample line");
      if (f == 0) omegas.push_back(w);
      factor.a.emplace_back(ar, ai);
      factor.b.emplace_back(br, bi);
      factor.phi.push_back(phi);
    }
    netlist.factors.push_back(std::move(factor));
  }
  if (next_line() != "residual") throw ValidationError("netlist: expected residual section");
  next_line();  // column header
  netlist.residual_phases.resize(points, netlist.n_modes);
  for (int k = 0; k < points; ++k) {
    std::istringstream ls(next_line());
    double w;
    ls >> w;
    if (factor_count == 0) omegas.push_back(w);
    for (int m = 0; m < netlist.n_modes; ++m) {
      if (!(ls >> netlist.residual_phases(k, m)))
        throw ValidationError("netlist: bad residual sample line");
    }
  }
  netlist.grid = FrequencyGrid::from_points(std::move(omegas), false);
  return netlist;
}

// ---------------------------------------------------------------------------
// Scenario driver.

namespace {

void write_abmd_bundle(const std::string& out_dir, const MorphingDecomposition& decomp,
                       std::vector<std::string>& files) {
  const int n2 = 2 * decomp.n_modes;
  {
    const std::string path = join_path(out_dir, "abmd_d.csv");
    std::ofstream out = open_out(path);
    out << "omega";
    for (int i = 1; i <= n2; ++i) out << ",d" << i;
    out << "\n";
    for (int k = 0; k < decomp.grid.size(); ++k) {
      out << format_sig(decomp.grid.at(k));
      for (int i = 0; i < n2; ++i) out << "," << format_sig(decomp.d_at(k)(i));
      out << "\n";
    }
    files.push_back(path);
  }
  {
    // Noise levels in dB for every supermode (20 log10 d_k), plot-ready.
    const std::string path = join_path(out_dir, "supermodes.csv");
    std::ofstream out = open_out(path);
    out << "omega";
    for (int i = 1; i <= n2; ++i) out << ",db" << i;
    out << "\n";
    for (int k = 0; k < decomp.grid.size(); ++k) {
      out << format_sig(decomp.grid.at(k));
      for (int i = 0; i < n2; ++i)
        out << "," << format_sig(20.0 * std::log10(decomp.d_at(k)(i)));
      out << "\n";
    }
    files.push_back(path);
  }
  for (int col = 1; col <= n2; ++col) {
    std::ostringstream name;
    name << "supermode_" << col << ".csv";
    const std::string path = join_path(out_dir, name.str());
    std::ofstream out = open_out(path);
    out << "omega";
    for (int i = 1; i <= n2; ++i) out << ",re(u_" << i << "),im(u_" << i << ")";
    out << "\n";
    for (int k = 0; k < decomp.grid.size(); ++k) {
      out << format_sig(decomp.grid.at(k));
      for (int i = 0; i < n2; ++i) {
        const Complex u = decomp.u_at(k)(i, col - 1);
        out << "," << format_sig(u.real()) << "," << format_sig(u.imag());
      }
      out << "\n";
    }
    files.push_back(path);
  }
}

std::string ordering_name(MeshOrdering ordering) {
  return ordering == MeshOrdering::kTriangular ? "triangular" : "rectangular";
}

void write_match_report(const std::string& path, const ScenarioConfig& cfg,
                        const OptimizeImeResult& result) {
  std::ofstream out = open_out(path);
  out << "imelab optimize-ime report\n";
  out << "scenario " << cfg.name << "\n";
  out << "modes " << cfg.n_modes << "\n";
  out << "topology stages=" << result.topology.n_stages
      << " equal_damping=" << (result.topology.equal_damping ? 1 : 0) << "\n";
  out << "target_index " << result.target_index << "\n";
  out << "objective " << cfg.optimize->objective << " value=" << format_sig(result.objective)
      << "\n";
  out << "band " << format_sig(result.band.lo) << " " << format_sig(result.band.hi)
      << " tol_db " << format_sig(result.report.tol_db) << "\n";
  out << "band_fraction " << format_sig(result.report.band_fraction) << "\n";
  out << "seed " << result.seed << "\n";
  out << "converged " << (result.converged ? 1 : 0) << "\n";
  const ImeParameterization param(cfg.n_modes,
                                  result.topology,
                                  result.objective_kind != ImeObjective::kStationary);
  const std::vector<std::string> labels = param.parameter_labels();
  out << "parameters " << result.parameters.size() << "\n";
  for (std::size_t i = 0; i < result.parameters.size(); ++i)
    out << labels[i] << " " << format_sig(result.parameters[i]) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

ImeObjective objective_from_name(const std::string& name) {
  if (name == "db-deviation") return ImeObjective::kDbDeviation;
  if (name == "overlap") return ImeObjective::kNegOverlap;
  if (name == "stationary") return ImeObjective::kStationary;
  throw ValidationError("config: unknown objective \"" + name + "\"");
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  ScenarioResult result;
  const FrequencyGrid grid = config.build_grid();

  switch (config.analysis) {
    case Analysis::kSpectrum: {
      const QuadraticSystem sys = config.build_system();
      if (config.lo_angles.empty())
        throw ValidationError("config: spectrum analysis needs lo.angles");
      const LocalOscillator lo =
          LocalOscillator::from_angles(config.lo_angles, config.n_modes);
      const TransferGrid transfer = transfer_function(sys, grid);
      const SpectralCovariance sigma = spectral_covariance(transfer);
      const NoiseSpectrum spectrum = noise_spectral_power(sigma, lo);
      const std::string path = join_path(out_dir, "spectrum.csv");
      write_noise_csv(path, spectrum);
      result.files.push_back(path);
      result.summary = "spectrum written (" + std::to_string(grid.size()) + " points)";
      break;
    }
    case Analysis::kAbmd: {
      const QuadraticSystem sys = config.build_system();
      const TransferGrid transfer = transfer_function(sys, grid);
      const MorphingDecomposition decomp = continue_decomposition(transfer);
      write_abmd_bundle(out_dir, decomp, result.files);
      result.summary = "abmd decomposition written";
      break;
    }
    case Analysis::kHdSweep: {
      const QuadraticSystem sys = config.build_system();
      const TransferGrid transfer = transfer_function(sys, grid);
      const SpectralCovariance sigma = spectral_covariance(transfer);
      std::vector<LocalOscillator> family;
      bool explicit_list = false;
      if (config.sweep && !config.sweep->lo_list.empty()) {
        explicit_list = true;
        for (const auto& angles : config.sweep->lo_list)
          family.push_back(LocalOscillator::from_angles(angles, config.n_modes));
      } else {
        const double res = config.sweep ? config.sweep->resolution_deg
                                        : kDefaultSweepResolutionDeg;
        family = lo_sweep_family(config.n_modes, res);
      }
      const HdSweep sweep = hd_sweep(sigma, family);
      if (explicit_list) {
        for (std::size_t i = 0; i < sweep.spectra.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "hd_sweep_%02zu.csv", i + 1);
          const std::string path = join_path(out_dir, name);
          write_noise_csv(path, sweep.spectra[i]);
          result.files.push_back(path);
        }
      }
      const std::string env_path = join_path(out_dir, "envelope.csv");
      write_noise_csv(env_path, sweep.envelope);
      result.files.push_back(env_path);
      {
        // Exact lower envelope over all real unit LOs.
        const std::vector<double> optimal = optimal_real_lo_power(sigma);
        NoiseSpectrum best;
        best.grid = sigma.grid;
        best.values = optimal;
        best.db.resize(optimal.size());
        for (std::size_t i = 0; i < optimal.size(); ++i) best.db[i] = to_db(optimal[i]);
        const std::string path = join_path(out_dir, "optimal.csv");
        write_noise_csv(path, best);
        result.files.push_back(path);
      }
      result.summary = "hd sweep written (" + std::to_string(family.size()) + " LOs)";
      break;
    }
    case Analysis::kOptimizeIme: {
      const QuadraticSystem sys = config.build_system();
      if (!config.optimize) throw ValidationError("config: missing optimize section");
      if (!config.optimize->seed_given)
        throw ValidationError("config: optimize.seed is required for reproducibility");
      ImeTopology topology{config.optimize->stages, config.optimize->equal_damping};
      OptimizeOptions options;
      options.seed = config.optimize->seed;
      options.multi_starts = config.optimize->starts;
      options.tol_db = config.optimize->tol_db;
      options.local.max_iterations = config.optimize->max_iterations;
      options.warm_starts = config.optimize->warm_starts;
      const ImeObjective objective = objective_from_name(config.optimize->objective);
      const OptimizeImeResult opt =
          optimize_ime(sys, config.resolved_target_index(), topology,
                       config.optimize->band, objective, options, grid);
      const std::string report_path = join_path(out_dir, "match_report.txt");
      write_match_report(report_path, config, opt);
      result.files.push_back(report_path);
      {
        const std::string path = join_path(out_dir, "match_curves.csv");
        std::ofstream out = open_out(path);
        out << "omega,target_db,detected_db,overlap\n";
        for (int k = 0; k < grid.size(); ++k) {
          const std::size_t i = static_cast<std::size_t>(k);
          out << format_sig(grid.at(k)) << "," << format_sig(opt.report.target_db[i]) << ","
              << format_sig(opt.report.detected_db[i]) << ","
              << format_sig(opt.report.overlap[i]) << "\n";
        }
        result.files.push_back(path);
      }
      {
        const TransferGrid ime = ime_transfer(opt.chain, grid);
        const SpectralCovariance sigma =
            spectral_covariance(transfer_function(sys, grid));
        const NoiseSpectrum detected = detected_spectrum(opt.lo, ime, sigma);
        const std::string path = join_path(out_dir, "detected.csv");
        write_noise_csv(path, detected);
        result.files.push_back(path);
      }
      result.converged = opt.converged;
      std::ostringstream summary;
      summary << "optimize-ime objective " << format_sig(opt.objective)
              << ", band_fraction " << format_sig(opt.report.band_fraction);
      result.summary = summary.str();
      break;
    }
    case Analysis::kDecompose: {
      if (!config.decompose) throw ValidationError("config: missing decompose section");
      const ImeChain chain = config.build_chain();
      const TransferGrid ime = ime_transfer(chain, grid);
      const std::vector<Eigen::MatrixXcd> u_grid = amplitude_upper_blocks(ime);
      const MeshOrdering ordering = config.decompose->ordering == "triangular"
                                        ? MeshOrdering::kTriangular
                                        : MeshOrdering::kRectangular;
      const MeshNetlist netlist = two_mode_decompose(u_grid, grid, ordering);
      const NetlistReport report = netlist_verify(netlist, u_grid);
      const std::string path = join_path(out_dir, "netlist.txt");
      write_netlist(path, netlist, report);
      result.files.push_back(path);
      if (config.decompose->mzi) {
        const MziMesh mesh = to_mzi_mesh(netlist);
        const std::string mzi_path = join_path(out_dir, "mzi_mesh.txt");
        std::ofstream out = open_out(mzi_path);
        out << "imelab-mzi-mesh v1\n";
        out << "ordering " << ordering_name(ordering) << "\n";
        out << "modes " << mesh.n_modes << "\n";
        out << "points " << mesh.grid.size() << "\n";
        out << "stages " << mesh.stages.size() << "\n";
        const std::vector<int> band_idx =
            grid.indices_in(config.decompose->band.lo, config.decompose->band.hi);
        std::vector<double> band_omegas;
        for (int k : band_idx) band_omegas.push_back(grid.at(k));
        for (std::size_t s = 0; s < mesh.stages.size(); ++s) {
          const MziStage& stage = mesh.stages[s];
          out << "stage " << s + 1 << " modes " << stage.m + 1 << " " << stage.n + 1
              << "\n";
          if (config.decompose->cavity_fit > 0) {
            std::vector<double> target;
            for (int k : band_idx) target.push_back(stage.phi[static_cast<std::size_t>(k)]);
            const CavityChain fit =
                fit_cavity_chain(target, band_omegas, config.decompose->cavity_fit,
                                 config.decompose->seed);
            out << "phase_fit constant=" << format_sig(fit.constant)
                << " residual=" << format_sig(fit.fit_residual)
                << " approximate=" << (fit.fit_residual > 1e-6 ? 1 : 0) << "\n";
            for (const auto& cav : fit.stages)
              out << "cavity gamma=" << format_sig(cav.gamma)
                  << " delta=" << format_sig(cav.delta) << "\n";
          }
          out << "omega theta phi\n";
          for (int k = 0; k < mesh.grid.size(); ++k)
            out << format_sig(mesh.grid.at(k)) << " "
                << format_sig(stage.theta[static_cast<std::size_t>(k)]) << " "
                << format_sig(stage.phi[static_cast<std::size_t>(k)]) << "\n";
        }
        out << "global_phases\n";
        out << "omega";
        for (int m = 1; m <= mesh.n_modes; ++m) out << " phi_" << m;
        out << "\n";
        for (int k = 0; k < mesh.grid.size(); ++k) {
          out << format_sig(mesh.grid.at(k));
          for (int m = 0; m < mesh.n_modes; ++m)
            out << " " << format_sig(mesh.global_phases(k, m));
          out << "\n";
        }
        result.files.push_back(mzi_path);
      }
      std::ostringstream summary;
      summary << "netlist written: " << netlist.factor_count() << " factors, max error "
              << format_sig(report.max_error);
      result.summary = summary.str();
      break;
    }
    case Analysis::kVerify: {
      if (config.verify_netlist.empty())
        throw ValidationError("config: verify.netlist path is required");
      const MeshNetlist netlist = read_netlist(config.verify_netlist);
      const ImeChain chain = config.build_chain();
      const TransferGrid ime = ime_transfer(chain, grid);
      if (netlist.grid.size() != grid.size())
        throw ValidationError("verify: netlist grid size differs from configured grid");
      const std::vector<Eigen::MatrixXcd> u_grid = amplitude_upper_blocks(ime);
      const NetlistReport report = netlist_verify(netlist, u_grid);
      const std::string path = join_path(out_dir, "verify_report.txt");
      std::ofstream out = open_out(path);
      out << "imelab netlist verification\n";
      out << "max_error " << format_sig(report.max_error) << "\n";
      out << "factor_count " << report.factor_count << "\n";
      out << "smoothness " << format_sig(report.smoothness) << "\n";
      out << "det_error " << format_sig(report.det_error) << "\n";
      out << "max_residual_phase " << format_sig(report.max_residual_phase) << "\n";
      result.files.push_back(path);
      std::ostringstream summary;
      summary << "verify: max reconstruction error " << format_sig(report.max_error);
      result.summary = summary.str();
      break;
    }
  }
  return result;
}

}  // namespace imelab
