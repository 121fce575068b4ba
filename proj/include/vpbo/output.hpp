#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vpbo/metrics.hpp"

namespace vpbo {

namespace fs = std::filesystem;

/// 17 significant digits, so that strtod gives back the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes to a temporary sibling and renames it into place, so a reader never
/// sees a partial file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// CSV

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "<csv>") {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw IoError(origin + ": row has " + std::to_string(cells.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError(origin + ": empty file");
  return t;
}

inline double parse_double(const std::string& s, const std::string& origin) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw IoError(origin + ": not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& origin) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw IoError(origin + ": not an integer: '" + s + "'");
  return v;
}

inline std::string point_header(const CategorySpace& space) {
  std::string h;
  for (int j = 0; j < space.num_categorical(); ++j) h += "h" + std::to_string(j + 1) + ",";
  for (int i = 0; i < space.cont_dim(); ++i) h += "x" + std::to_string(i + 1) + ",";
  return h;
}

inline std::string point_cells(const MixedPoint& z) {
  std::string s;
  for (int v : z.h) s += std::to_string(v) + ",";
  for (Eigen::Index i = 0; i < z.x.size(); ++i) s += format_double(z.x[i]) + ",";
  return s;
}

inline MixedPoint point_from_row(const CsvTable& tab, const std::vector<std::string>& row, const CategorySpace& space,
                                 const std::string& origin) {
  MixedPoint z;
  for (int j = 0; j < space.num_categorical(); ++j) {
    const int c = tab.column("h" + std::to_string(j + 1));
    if (c < 0) throw IoError(origin + ": missing column h" + std::to_string(j + 1));
    z.h.push_back(static_cast<int>(parse_int(row[static_cast<std::size_t>(c)], origin)));
  }
  z.x.resize(space.cont_dim());
  for (int i = 0; i < space.cont_dim(); ++i) {
    const int c = tab.column("x" + std::to_string(i + 1));
    if (c < 0) throw IoError(origin + ": missing column x" + std::to_string(i + 1));
    z.x[i] = parse_double(row[static_cast<std::size_t>(c)], origin);
  }
  return z;
}

/// Columns t,h1..hk,x1..xd,y,best,combo,hyperopt; one row per iteration. Fully
/// determined by the seed; wall-clock overheads go to timing_csv.
inline std::string trace_csv(const Trace& tr, const CategorySpace& space) {
  std::string s = "t," + point_header(space) + "y,best,combo,hyperopt\n";
  for (const auto& r : tr.records) {
    s += std::to_string(r.t) + "," + point_cells(r.z) + format_double(r.y) + "," + format_double(r.best) + "," +
         std::to_string(r.combo) + "," + (r.hyperopt ? "1" : "0") + "\n";
  }
  return s;
}

/// t,overhead_s: seconds spent per iteration outside the objective.
inline std::string timing_csv(const Trace& tr) {
  std::string s = "t,overhead_s\n";
  for (const auto& r : tr.records) s += std::to_string(r.t) + "," + format_double(r.overhead_s) + "\n";
  return s;
}

/// The initial design: i,h1..hk,x1..xd,y,searched.
inline std::string init_csv(const Trace& tr, const CategorySpace& space) {
  std::string s = "i," + point_header(space) + "y,searched\n";
  for (std::size_t i = 0; i < tr.init.size(); ++i) {
    const bool searched = i < tr.init_searched.size() && tr.init_searched[i];
    s += std::to_string(i) + "," + point_cells(tr.init.points()[i]) + format_double(tr.init.values()[i]) + "," +
         (searched ? "1" : "0") + "\n";
  }
  return s;
}

inline Trace parse_trace(const std::string& trace_text, const std::string& init_text, const std::string& timing_text,
                         const CategorySpace& space, const std::string& strategy, std::uint64_t seed,
                         const std::string& origin = "<trace>") {
  Trace tr;
  tr.strategy = strategy;
  tr.seed = seed;
  tr.init = ObservationSet(space);

  const CsvTable init = parse_csv(init_text, origin + " (init)");
  const int iy = init.column("y"), is = init.column("searched");
  if (iy < 0 || is < 0) throw IoError(origin + " (init): missing y/searched column");
  for (const auto& row : init.rows) {
    tr.init.add(point_from_row(init, row, space, origin), parse_double(row[iy], origin));
    tr.init_searched.push_back(parse_int(row[is], origin) != 0);
  }

  const CsvTable tab = parse_csv(trace_text, origin);
  const int ct = tab.column("t"), cy = tab.column("y"), cb = tab.column("best"), cc = tab.column("combo"),
            ch = tab.column("hyperopt");
  if (ct < 0 || cy < 0 || cb < 0 || cc < 0 || ch < 0) throw IoError(origin + ": missing trace column");
  for (const auto& row : tab.rows) {
    TrialRecord r;
    r.t = static_cast<int>(parse_int(row[ct], origin));
    r.z = point_from_row(tab, row, space, origin);
    r.y = parse_double(row[cy], origin);
    r.best = parse_double(row[cb], origin);
    r.combo = static_cast<std::size_t>(parse_int(row[cc], origin));
    r.hyperopt = parse_int(row[ch], origin) != 0;
    tr.records.push_back(std::move(r));
  }

  const CsvTable timing = parse_csv(timing_text, origin + " (timing)");
  const int tt = timing.column("t"), to = timing.column("overhead_s");
  if (tt < 0 || to < 0) throw IoError(origin + " (timing): missing t/overhead_s column");
  if (timing.rows.size() != tr.records.size())
    throw IoError(origin + " (timing): " + std::to_string(timing.rows.size()) + " rows for " +
                  std::to_string(tr.records.size()) + " iterations");
  for (std::size_t i = 0; i < timing.rows.size(); ++i) {
    if (parse_int(timing.rows[i][tt], origin) != tr.records[i].t) throw IoError(origin + " (timing): iteration mismatch");
    tr.records[i].overhead_s = parse_double(timing.rows[i][to], origin);
  }
  return tr;
}

/// File locations of one persisted trial.
struct TracePaths {
  fs::path trace, init, timing;

  bool complete() const { return fs::exists(trace) && fs::exists(init) && fs::exists(timing); }
};

inline void write_trace(const TracePaths& p, const Trace& tr, const CategorySpace& space) {
  write_file_atomic(p.init, init_csv(tr, space));
  write_file_atomic(p.timing, timing_csv(tr));
  write_file_atomic(p.trace, trace_csv(tr, space));
}

inline Trace read_trace(const TracePaths& p, const CategorySpace& space, const std::string& strategy,
                        std::uint64_t seed) {
  return parse_trace(read_file(p.trace), read_file(p.init), read_file(p.timing), space, strategy, seed,
                     p.trace.string());
}

/// t,mean,stderr with t = 0 the initial design.
inline std::string summary_csv(const Aggregate& a) {
  std::string s = "t,mean,stderr\n";
  for (std::size_t t = 0; t < a.size(); ++t)
    s += std::to_string(t) + "," + format_double(a.mean[t]) + "," + format_double(a.std_error[t]) + "\n";
  return s;
}

inline Aggregate parse_summary(const std::string& text, const std::string& origin = "<summary>") {
  const CsvTable tab = parse_csv(text, origin);
  const int cm = tab.column("mean"), cs = tab.column("stderr");
  if (cm < 0 || cs < 0) throw IoError(origin + ": missing mean/stderr column");
  Aggregate a;
  for (const auto& row : tab.rows) {
    a.mean.push_back(parse_double(row[cm], origin));
    a.std_error.push_back(parse_double(row[cs], origin));
  }
  return a;
}

// ---------------------------------------------------------------------------
// SVG

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
    case '&': o += "&amp;"; break;
    case '<': o += "&lt;"; break;
    case '>': o += "&gt;"; break;
    case '"': o += "&quot;"; break;
    default: o += c;
    }
  }
  return o;
}

/// Best-so-far mean as one polyline per series, with a mean +- stderr band.
inline std::string render_svg(const std::vector<std::pair<std::string, Aggregate>>& series,
                              const std::string& title = "best-so-far") {
  constexpr double W = 640, H = 400, L = 60, R = 150, T = 30, B = 40;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t len = 1;
  for (const auto& [name, a] : series) {
    len = std::max(len, a.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
      lo = std::min(lo, a.mean[t] - a.std_error[t]);
      hi = std::max(hi, a.mean[t] + a.std_error[t]);
    }
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double xspan = std::max<double>(1.0, static_cast<double>(len - 1));
  auto px = [&](double t) { return L + (W - L - R) * t / xspan; };
  auto py = [&](double v) { return T + (H - T - B) * (hi - v) / (hi - lo); };
  auto pt = [&](double t, double v) { return format_double(px(t)) + "," + format_double(py(v)); };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << " " << H << "\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
     << "<text x=\"" << L << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << L << "\" y=\"" << H - 10 << "\" font-size=\"11\">0</text>\n"
     << "<text x=\"" << W - R << "\" y=\"" << H - 10 << "\" font-size=\"11\" text-anchor=\"end\">" << len - 1 << "</text>\n"
     << "<text x=\"" << L - 4 << "\" y=\"" << T + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(hi).substr(0, 8)
     << "</text>\n"
     << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(lo).substr(0, 8)
     << "</text>\n";
  std::size_t k = 0;
  for (const auto& [name, a] : series) {
    const char* colour = palette[k % std::size(palette)];
    std::string band, line;
    for (std::size_t t = 0; t < a.size(); ++t) band += pt(static_cast<double>(t), a.mean[t] + a.std_error[t]) + " ";
    for (std::size_t t = a.size(); t-- > 0;) band += pt(static_cast<double>(t), a.mean[t] - a.std_error[t]) + " ";
    for (std::size_t t = 0; t < a.size(); ++t) line += pt(static_cast<double>(t), a.mean[t]) + " ";
    os << "<polygon points=\"" << band << "\" fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
       << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>\n"
       << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" font-size=\"12\" fill=\"" << colour << "\">"
       << xml_escape(name) << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Output set

/// Everything the harness reports for one experiment.
struct ExperimentOutputs {
  const CategorySpace* space = nullptr;
  std::map<std::string, std::vector<Trace>> traces; // by strategy id
  std::map<std::string, Aggregate> summaries;
  std::map<std::string, double> arm_frequency;
  int top_n = 5;
  std::map<std::string, std::vector<double>> good_choice;
  std::map<std::string, Wallclock> wallclock;
};

inline std::string trace_file_name(const std::string& strategy, int trial) {
  return "trace_" + strategy + "_" + std::to_string(trial) + ".csv";
}

inline std::string init_file_name(const std::string& strategy, int trial) {
  return "init_" + strategy + "_" + std::to_string(trial) + ".csv";
}

inline std::string timing_file_name(const std::string& strategy, int trial) {
  return "timing_" + strategy + "_" + std::to_string(trial) + ".csv";
}

inline TracePaths trace_paths(const fs::path& dir, const std::string& strategy, int trial) {
  return {dir / trace_file_name(strategy, trial), dir / init_file_name(strategy, trial),
          dir / timing_file_name(strategy, trial)};
}

/// Writes summaries, metric tables and plots into `dir`. Trace files are
/// written by the runner as trials finish. Metric files are only written when
/// the corresponding metric is present.
inline void emit_outputs(const ExperimentOutputs& o, const fs::path& dir) {
  std::vector<std::pair<std::string, Aggregate>> all;
  for (const auto& [name, a] : o.summaries) {
    write_file_atomic(dir / ("summary_" + name + ".csv"), summary_csv(a));
    write_file_atomic(dir / ("summary_" + name + ".svg"), render_svg({{name, a}}, name + ": best-so-far"));
    all.emplace_back(name, a);
  }
  if (all.size() > 1) write_file_atomic(dir / "summary.svg", render_svg(all, "best-so-far"));

  if (!o.arm_frequency.empty()) {
    std::string s = "strategy,top_n,frequency\n";
    for (const auto& [name, f] : o.arm_frequency) s += name + "," + std::to_string(o.top_n) + "," + format_double(f) + "\n";
    write_file_atomic(dir / "arm_freq.csv", s);
  }
  if (!o.good_choice.empty()) {
    std::string s = "strategy,t,frequency\n";
    for (const auto& [name, f] : o.good_choice)
      for (std::size_t t = 0; t < f.size(); ++t) s += name + "," + std::to_string(t + 1) + "," + format_double(f[t]) + "\n";
    write_file_atomic(dir / "good_choice.csv", s);
  }
  if (!o.wallclock.empty()) {
    std::string s = "strategy,iterations,mean_s,hyperopt_mean_s,plain_mean_s\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& [name, w] : o.wallclock)
      s += name + "," + std::to_string(w.iterations) + "," + format_double(w.overall) + "," + opt(w.hyperopt) + "," +
           opt(w.plain) + "\n";
    write_file_atomic(dir / "wallclock.csv", s);
  }
}

} // namespace vpbo
