#include "infspec/cli.hpp"

#include "infspec/infty_spectrum.hpp"
#include "infspec/mesh.hpp"
#include "infspec/plap_fem.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace infspec::cli {

namespace {

const char* kModule = "cli";

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, kModule, msg); }

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string join(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

// Runs fn(i) for i < n on up to worker_count() threads; results keep input order.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, Fn fn) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        slots[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned k = std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<double> betas(const RunConfig& c) {
  if (c.sweep) return c.sweep->values();
  return {*c.beta};
}

struct Table {
  std::string header;
  std::vector<std::string> rows;
  std::string summary;
};

SearchOptions search_options(const RunConfig& c) {
  SearchOptions o;
  o.seed = c.seed;
  return o;
}

std::string pm(const std::string& quantity, double value, double err) {
  return quantity + " = " + num(value) + " +- " + num(err);
}

Table run_geom(const RunConfig& c, const DomainFile& d) {
  const Polygon& P = d.polygon;
  Table t;
  if (c.action == "inradius") {
    const auto in = inradius(P);
    t.header = "r,incenter_x,incenter_y\n";
    t.rows.push_back(join({num(in.r), num(in.incenter.x()), num(in.incenter.y())}));
    t.summary = pm("r", in.r, 1e-9 * euclidean_diameter(P).diameter);
  } else if (c.action == "diameter") {
    const auto de = euclidean_diameter(P);
    const auto dg = geodesic_diameter(P);
    t.header = "kind,diameter,x1,y1,x2,y2,sampling_error\n";
    for (const auto& [name, r] : {std::pair{"euclidean", de}, std::pair{"geodesic", dg}})
      t.rows.push_back(join({name, num(r.diameter), num(r.pair.first.x()), num(r.pair.first.y()), num(r.pair.second.x()),
                             num(r.pair.second.y()), num(r.sampling_error)}));
    t.summary = pm("D_e", de.diameter, 0.0) + "; " + pm("D_g", dg.diameter, dg.sampling_error);
  } else {  // info
    const auto in = inradius(P);
    const auto de = euclidean_diameter(P);
    const auto dg = geodesic_diameter(P);
    t.header = "vertices,area,perimeter,convex,r,D_e,D_g,min_edge\n";
    t.rows.push_back(join({std::to_string(P.size()), num(P.area()), num(P.perimeter()), P.is_convex() ? "1" : "0",
                           num(in.r), num(de.diameter), num(dg.diameter), num(P.min_edge_length())}));
    t.summary = "vertices = " + std::to_string(P.size()) + ", area = " + num(P.area()) + ", r = " + num(in.r) +
                ", D_e = " + num(de.diameter);
  }
  return t;
}

Table run_infty(const RunConfig& c, const DomainFile& d) {
  const Polygon& P = d.polygon;
  const SearchOptions so = search_options(c);
  Table t;
  const std::string& a = c.action;
  if (a == "r2") {
    const R2Result r = r2(P, so);
    t.header = "r2,inv_r2,x1,y1,x2,y2\n";
    t.rows.push_back(join({num(r.r2), num(1.0 / r.r2), num(r.pair.first.x()), num(r.pair.first.y()),
                           num(r.pair.second.x()), num(r.pair.second.y())}));
    t.summary = pm("r2", r.r2, so.tol_rel * euclidean_diameter(P).diameter);
    return t;
  }
  const std::vector<double> bs = betas(c);
  double last_value = 0.0, last_err = 0.0;
  std::string quantity = a;
  if (a == "lambda1") {
    const double r = inradius(P).r;
    t.header = "beta,lambda1,r\n";
    for (double b : bs) {
      last_value = lambda1_infty(P, b);
      t.rows.push_back(join({num(b), num(last_value), num(r)}));
    }
    last_err = last_value * last_value * 1e-9 * euclidean_diameter(P).diameter;
  } else if (a == "lambda2" || a == "s") {
    const auto res = parallel_map<SOmegaResult>(bs.size(), [&](std::size_t i) { return s_omega(P, bs[i], so); });
    t.header = "beta,s,lambda2,x1x,x1y,x2x,x2y,active_constraints,objective_gap,tol_opt\n";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto& r = res[i];
      std::string active;
      for (ActiveConstraint ac : r.active)
        active += std::string(active.empty() ? "" : "|") +
                  (ac == ActiveConstraint::PairDistance ? "pair" : ac == ActiveConstraint::Trace1 ? "trace1" : "trace2");
      t.rows.push_back(join({num(bs[i]), num(r.s), num(1.0 / r.s), num(r.x1.x()), num(r.x1.y()), num(r.x2.x()),
                             num(r.x2.y()), active, num(r.objective_gap), num(r.tol_opt)}));
      const double err_s = std::max(r.objective_gap, r.tol_opt);
      last_value = a == "s" ? r.s : 1.0 / r.s;
      last_err = a == "s" ? err_s : err_s / (r.s * r.s);
    }
  } else if (a == "mixed") {
    const BoundaryPartition part = d.partition ? *d.partition : BoundaryPartition::all(P, BoundaryLabel::Gamma2);
    const auto res = parallel_map<MixedResult>(bs.size(), [&](std::size_t i) { return mixed_lambda_infty(P, part, bs[i]); });
    t.header = "beta,lambda,argmin_x,argmin_y,a_nonempty,error_bar\n";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto& r = res[i];
      t.rows.push_back(join({num(bs[i]), num(r.lambda), num(r.argmin.x()), num(r.argmin.y()), r.a_nonempty ? "1" : "0",
                             num(r.error_bar)}));
      last_value = r.lambda;
      last_err = r.error_bar;
    }
    quantity = "lambda_mixed";
  } else if (a == "regime") {
    const auto res =
        parallel_map<RegimeReport>(bs.size(), [&](std::size_t i) { return regime_report(P, bs[i], {}, so); });
    t.header = "beta,lambda1,lambda2,two_over_Dg,two_over_De,inv_r2,regime\n";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto& r = res[i];
      t.rows.push_back(join({num(bs[i]), num(r.lambda1), num(r.lambda2), num(r.two_over_Dg), num(r.two_over_De),
                             num(r.inv_r2), to_string(r.regime)}));
      last_value = r.lambda2;
      last_err = so.tol_rel * euclidean_diameter(P).diameter * r.lambda2 * r.lambda2;
    }
    quantity = "lambda2";
  } else {  // path
    const double res = c.path_resolution > 0 ? c.path_resolution : euclidean_diameter(P).diameter / 100.0;
    const auto out = parallel_map<std::pair<PathSup, double>>(bs.size(), [&](std::size_t i) {
      const PathFunction path = build_minmax_path(P, bs[i], c.path_steps, so);
      return std::pair{path_functional_sup(P, path, bs[i], res), lambda2_infty(P, bs[i], so)};
    });
    t.header = "beta,sup_estimate,analytic_bound,error_bar,lambda2,worst_segment,worst_t,resolution\n";
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto& [ps, l2] = out[i];
      t.rows.push_back(join({num(bs[i]), num(ps.estimate), num(ps.analytic_bound), num(ps.error_bar), num(l2),
                             ps.worst_segment, num(ps.worst_t), num(res)}));
      last_value = ps.estimate;
      last_err = ps.error_bar;
    }
    quantity = "path_sup";
  }
  t.summary = pm(quantity, last_value, last_err);
  if (bs.size() > 1) t.summary += " (last of " + std::to_string(bs.size()) + " beta values)";
  return t;
}

std::string plap_row(const std::string& label, double beta, const EigenResult& r, double target) {
  return join({label, num(beta), num(r.p), num(r.h), num(r.lambda), num(r.lambda_root), num(target),
               num(std::abs(r.lambda_root - target) / target), std::to_string(r.iterations), num(r.residual)});
}

Table run_plap(const RunConfig& c, const DomainFile& d) {
  const Polygon& P = d.polygon;
  const double beta = *c.beta;
  const Mesh mesh = triangulate(P, c.h);
  if (!c.mesh_out.empty()) {
    std::ofstream f(c.mesh_out);
    if (!f) config_error("cannot write mesh file '" + c.mesh_out + "'");
    f << mesh_to_text(mesh);
  }
  SolverOptions opts;
  opts.tol = c.tol;
  Table t;
  if (c.action == "study") {
    const std::vector<double> ps = c.p_list.empty() ? std::vector<double>{2, 4, 8, 16, 32} : c.p_list;
    const StudyTable st = convergence_study(P, mesh, beta, ps, opts);
    t.header = "label,beta,p,h,lambda,lambda_root,target_infty,gap,iterations,residual,dlg_lower,cone_upper,sign_changing,error\n";
    int failed = 0;
    for (const auto& r : st.rows) {
      auto row = [&](const std::string& label, double lam, double root, double target, double gap, int it, double res) {
        std::string line = join({label, num(beta), num(r.p), num(r.h), num(lam), num(root), num(target), num(gap),
                                 std::to_string(it), num(res), num(r.dlg), num(r.cone_bound), r.sign_changing ? "1" : "0",
                                 r.error.empty() ? "" : "\"" + r.error + "\""});
        t.rows.push_back(line);
      };
      if (!r.error.empty()) ++failed;
      row("first", r.lambda1, r.lambda1_root, r.target1, r.gap1, r.iterations1, r.residual1);
      row("second", r.lambda2, r.lambda2_root, r.target2, r.gap2, r.iterations2, r.residual2);
    }
    const auto& last = st.rows.back();
    t.summary = pm("lambda2_root", last.lambda2_root, last.residual2) + " at p = " + num(last.p) + ", gap = " +
                num(last.gap2) + ", nodes = " + std::to_string(st.nodes);
    if (failed) {
      std::ostringstream os;
      os << failed << " of " << st.rows.size() << " rows failed";
      throw Error(ErrorKind::NonConvergence, "plap_fem", os.str() + "; first failure: " + [&] {
        for (const auto& r : st.rows)
          if (!r.error.empty()) return r.error;
        return std::string();
      }());
    }
    return t;
  }
  const double p = *c.p;
  t.header = "label,beta,p,h,lambda,lambda_root,target_infty,gap,iterations,residual\n";
  if (c.action == "first") {
    const EigenResult r = minimize_first(mesh, p, beta, opts);
    t.rows.push_back(plap_row("first", beta, r, lambda1_infty(P, beta)));
    t.summary = pm("lambda1_root", r.lambda_root, r.residual);
  } else {
    const SOmegaResult sres = s_omega(P, beta, search_options(c));
    opts.cone_pair = std::pair{Cone{sres.x1, sres.s}, Cone{sres.x2, sres.s}};
    const EigenResult r = minimize_second(mesh, p, beta, opts);
    t.rows.push_back(plap_row("second", beta, r, 1.0 / sres.s));
    t.summary = pm("lambda2_root", r.lambda_root, r.residual);
  }
  return t;
}

void write_diagnostic(const RunConfig& c, const std::string& cmdline, const std::exception& e, std::ostream& err) {
  const std::string path = c.out_path.empty() ? "infspec-failure.txt" : c.out_path + ".diag.txt";
  std::ofstream f(path);
  if (!f) return;
  f << "command: " << cmdline << "\n";
  if (const auto* ie = dynamic_cast<const Error*>(&e)) {
    f << "kind: " << to_string(ie->kind()) << "\nmodule: " << ie->module() << "\n";
  }
  f << "message: " << e.what() << "\n";
  if (const auto* nc = dynamic_cast<const SolverNonConvergence*>(&e)) {
    f << "best_lambda: " << num(nc->best.lambda) << "\nbest_lambda_root: " << num(nc->best.lambda_root)
      << "\nbest_residual: " << num(nc->best.residual) << "\niterations: " << nc->best.iterations << "\n";
  }
  if (const auto* ss = dynamic_cast<const SearchStalled*>(&e)) {
    f << "best_s: " << num(ss->best.s) << "\nobjective_gap: " << num(ss->best.objective_gap) << "\n";
  }
  err << "diagnostic written to " << path << "\n";
}

}  // namespace

std::vector<double> BetaSweep::values() const {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = from + (to - from) * i / (count - 1);
  return v;
}

BetaSweep parse_sweep(const std::string& text) {
  BetaSweep s;
  std::istringstream is(text);
  char c1 = 0, c2 = 0;
  if (!(is >> s.from >> c1 >> s.to >> c2 >> s.count) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
    config_error("beta sweep must look like B0:B1:N, got '" + text + "'");
  if (s.count < 2) config_error("beta sweep needs N >= 2");
  if (!(s.from > 0) || !(s.to > s.from)) config_error("beta sweep needs 0 < B0 < B1");
  return s;
}

std::vector<double> parse_p_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      std::size_t used = 0;
      const double p = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(p);
    } catch (const std::exception&) {
      config_error("bad entry '" + item + "' in p list");
    }
  }
  if (out.empty()) config_error("empty p list");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 2)) config_error("p values must be >= 2");
    if (i && !(out[i] > out[i - 1])) config_error("p list must be strictly ascending");
  }
  return out;
}

void validate(const RunConfig& c) {
  if (c.group == "domain") {
    if (c.out_path.empty()) config_error("domain make needs --out");
    return;
  }
  if (c.domain_path.empty()) config_error("--domain is required");
  if (!std::filesystem::exists(c.domain_path)) config_error("domain file '" + c.domain_path + "' does not exist");
  if (c.beta && c.sweep) config_error("--beta and --beta-sweep are mutually exclusive");
  if (c.beta && !(*c.beta > 0)) config_error("--beta must be positive");
  const bool needs_beta = (c.group == "infty" && c.action != "r2") || c.group == "plap";
  if (needs_beta && !c.beta && !c.sweep) config_error(c.group + " " + c.action + " needs --beta or --beta-sweep");
  if (c.group == "plap") {
    if (c.sweep) config_error("plap takes a single --beta");
    if (!(c.h > 0)) config_error("--h must be positive");
    if (c.action != "study" && !c.p) config_error("plap " + c.action + " needs --p");
    if (c.p && !(*c.p >= 2)) config_error("--p must be >= 2");
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::BadParameters:
      return 2;
    case ErrorKind::DomainFileError:
    case ErrorKind::SelfIntersection:
    case ErrorKind::ZeroArea:
    case ErrorKind::DuplicateVertex:
    case ErrorKind::TooFewVertices:
    case ErrorKind::InvalidPartition:
    case ErrorKind::InvalidStadium:
      return 3;
    default:
      return 4;
  }
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("INFSPEC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(std::min<long>(v, hw));
  }
  return hw;
}

std::string run(const RunConfig& c, std::ostream& csv_fallback) {
  validate(c);
  if (c.group == "domain") {
    const DomainFile f = make_builtin_domain(c.builtin, c.builtin_params);
    write_domain_file(c.out_path, f);
    std::string s = c.builtin + ": " + std::to_string(f.polygon.size()) + " vertices";
    if (auto it = f.metadata.find("polygonalization_error"); it != f.metadata.end())
      s += ", polygonalization error " + num(it->second);
    return s + " -> " + c.out_path;
  }
  const DomainFile d = read_domain_file(c.domain_path);
  Table t = c.group == "geom" ? run_geom(c, d) : c.group == "infty" ? run_infty(c, d) : run_plap(c, d);
  if (c.out_path.empty()) {
    csv_fallback << t.header;
    for (const auto& r : t.rows) csv_fallback << r;
  } else {
    std::ofstream f(c.out_path, std::ios::binary);
    if (!f) config_error("cannot write '" + c.out_path + "'");
    f << t.header;
    for (const auto& r : t.rows) f << r;
  }
  return t.summary;
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string sweep, p_list;
  CLI::App app{"Robin infinity-Laplacian spectral quantities on polygons"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* s, bool beta) {
    s->add_option("--domain", c.domain_path, "domain JSON file");
    if (beta) {
      s->add_option("--beta", c.beta, "Robin parameter");
      s->add_option("--beta-sweep", sweep, "B0:B1:N");
    }
    s->add_option("--out", c.out_path, "CSV output path (stdout when omitted)");
    s->add_option("--seed", c.seed, "multi-start seed");
  };

  auto* geom = app.add_subcommand("geom", "polygon geometry");
  geom->add_option("action", c.action)->required()->check(CLI::IsMember({"info", "inradius", "diameter"}));
  common(geom, false);

  auto* infty = app.add_subcommand("infty", "limit eigenvalues");
  infty->add_option("action", c.action)
      ->required()
      ->check(CLI::IsMember({"lambda1", "lambda2", "s", "r2", "mixed", "regime", "path"}));
  common(infty, true);
  infty->add_option("--path-steps", c.path_steps, "samples per path segment");
  infty->add_option("--path-resolution", c.path_resolution, "probe lattice spacing (default D_e/100)");

  auto* plap = app.add_subcommand("plap", "finite-p finite elements");
  plap->set_help_flag("--help", "print this help message and exit");  // -h is the mesh size here
  plap->add_option("action", c.action)->required()->check(CLI::IsMember({"first", "second", "study"}));
  common(plap, true);
  plap->add_option("--p", c.p, "exponent");
  plap->add_option("--p-list", p_list, "ascending list, e.g. 2,4,8,16,32");
  plap->add_option("--h", c.h, "target mesh size");
  plap->add_option("--tol", c.tol, "relative quotient decrease per sweep");
  plap->add_option("--mesh-out", c.mesh_out, "write the mesh as text");

  auto* domain = app.add_subcommand("domain", "domain files");
  domain->add_option("action", c.action)->required()->check(CLI::IsMember({"make"}));
  domain->add_option("name", c.builtin)->required()->check(CLI::IsMember({"unit_square", "rectangle", "stadium", "lshape"}));
  domain->add_option("--out", c.out_path, "JSON output path")->required();
  domain->add_option("--a", c.builtin_params.a, "rectangle width");
  domain->add_option("--b", c.builtin_params.b, "rectangle height");
  domain->add_option("--r", c.builtin_params.r, "stadium radius");
  domain->add_option("--D", c.builtin_params.D, "stadium length");
  domain->add_option("--arc-n", c.builtin_params.arc_n, "stadium vertices per cap");

  std::string cmdline;
  for (int i = 0; i < argc; ++i) cmdline += (i ? " " : "") + std::string(argv[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  for (auto* s : {geom, infty, plap, domain})
    if (s->parsed()) c.group = s->get_name();

  try {
    if (!sweep.empty()) c.sweep = parse_sweep(sweep);
    if (!p_list.empty()) c.p_list = parse_p_list(p_list);
    const std::string summary = run(c, out);
    out << summary << "\n";
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";
    const int code = exit_code(e.kind());
    if (code == 4) write_diagnostic(c, cmdline, e, err);
    return code;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    write_diagnostic(c, cmdline, e, err);
    return 4;
  }
}

}  // namespace infspec::cli
