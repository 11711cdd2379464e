#include "epmix/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "epmix/random.hpp"

namespace epmix {

namespace {

constexpr double kPanelW = 760.0;
constexpr double kPanelH = 220.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 50.0;
constexpr double kGap = 60.0;

const char* color(Parametrization p) {
  switch (p) {
    case Parametrization::naive:
      return "#1b9e77";
    case Parametrization::centered:
      return "#d95f02";
    case Parametrization::noncentered:
      return "#7570b3";
  }
  return "#000000";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Evenly spaced "nice" ticks covering [lo, hi].
std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = f * mag;
    if (span / step <= target) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
    const double d = std::max(1.0, std::abs(hi) * 0.1);
    return {lo - d, hi + d};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

struct Axes {
  double x0, y0, w, h;  // pixel box, y0 = top
  double xlo, xhi, ylo, yhi;

  double px(double x) const { return x0 + (x - xlo) / (xhi - xlo) * w; }
  double py(double y) const { return y0 + h - (y - ylo) / (yhi - ylo) * h; }
};

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void text(double x, double y, const std::string& s, const char* anchor = "middle", int size = 12,
            const std::string& extra = "") {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-size=\""
          << size << "\"" << extra << ">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#000000", double width = 1.0) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
          << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(width) << "\"/>\n";
  }
  void circle(double x, double y, double r, const char* fill) {
    body_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\"" << fill
          << "\" fill-opacity=\"0.7\"/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.2\" stroke-opacity=\"0.8\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) body_ << (i ? " " : "") << num(pts[i].first) << "," << num(pts[i].second);
    body_ << "\"/>\n";
  }
  void open_group(const std::string& attrs) { body_ << "<g " << attrs << ">\n"; }
  void close_group() { body_ << "</g>\n"; }
  void rect(double x, double y, double w, double h, const char* stroke) {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
          << "\" fill=\"none\" stroke=\"" << stroke << "\"/>\n";
  }

  void axes(const Axes& a, const std::string& ylabel, bool numeric_x, const std::string& xlabel) {
    rect(a.x0, a.y0, a.w, a.h, "#444444");
    for (double t : ticks(a.ylo, a.yhi)) {
      const double y = a.py(t);
      line(a.x0 - 4, y, a.x0, y);
      line(a.x0, y, a.x0 + a.w, y, "#e6e6e6");
      text(a.x0 - 7, y + 4, label(t), "end", 10);
    }
    if (numeric_x) {
      for (double t : ticks(a.xlo, a.xhi, 8)) {
        const double x = a.px(t);
        line(x, a.y0 + a.h, x, a.y0 + a.h + 4);
        text(x, a.y0 + a.h + 16, label(t), "middle", 10);
      }
    }
    const double cy = a.y0 + a.h / 2;
    text(a.x0 - 55, cy, ylabel, "middle", 12,
         " transform=\"rotate(-90 " + num(a.x0 - 55) + " " + num(cy) + ")\"");
    if (!xlabel.empty()) text(a.x0 + a.w / 2, a.y0 + a.h + 34, xlabel, "middle", 12);
  }

  void legend(double x, double y, const std::vector<Parametrization>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double yy = y + 18.0 * static_cast<double>(i);
      circle(x, yy - 4, 5, color(params[i]));
      text(x + 10, yy, std::string(to_string(params[i])), "start", 12);
    }
  }

  std::string str(const std::string& title) const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\"" << num(height_)
        << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
        << "<text x=\"" << num(width_ / 2) << "\" y=\"26\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_, height_;
  std::ostringstream body_;
};

std::vector<Parametrization> present(const std::vector<SummaryRow>& rows) {
  std::set<Parametrization> s;
  for (const auto& r : rows) s.insert(r.parametrization);
  return {s.begin(), s.end()};
}

std::vector<double> q_values(const std::vector<SummaryRow>& rows) {
  std::vector<double> qs;
  for (const auto& r : rows) {
    bool seen = false;
    for (double q : qs) seen = seen || std::abs(q - r.q) < 1e-9;
    if (!seen) qs.push_back(r.q);
  }
  std::sort(qs.begin(), qs.end());
  return qs;
}

std::size_t q_slot(const std::vector<double>& qs, double q) {
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (std::abs(qs[i] - q) < 1e-9) return i;
  }
  return 0;
}

// Jittered strips: one column group per q, one sub-column per parametrization.
void strip_panel(Svg& svg, const Axes& a, const std::vector<SummaryRow>& rows, const std::vector<double>& qs,
                 const std::vector<Parametrization>& params, double (*value)(const SummaryRow&)) {
  const double slot = a.w / static_cast<double>(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const double cx = a.x0 + slot * (static_cast<double>(i) + 0.5);
    svg.line(cx, a.y0 + a.h, cx, a.y0 + a.h + 4);
    svg.text(cx, a.y0 + a.h + 16, label(qs[i]), "middle", 10);
    if (i > 0) svg.line(a.x0 + slot * static_cast<double>(i), a.y0, a.x0 + slot * static_cast<double>(i), a.y0 + a.h, "#f0f0f0");
  }
  const double sub = slot / static_cast<double>(params.size() + 1);
  Rng jitter(17, {0x5719});
  for (const auto& r : rows) {
    const double v = value(r);
    if (!std::isfinite(v)) continue;
    const auto pi = static_cast<std::size_t>(std::find(params.begin(), params.end(), r.parametrization) - params.begin());
    const double x = a.x0 + slot * static_cast<double>(q_slot(qs, r.q)) + sub * static_cast<double>(pi + 1) +
                     jitter.uniform(-0.3, 0.3) * sub;
    svg.circle(x, a.py(v), 3, color(r.parametrization));
  }
}

double mean_log_summary(const SummaryRow& r) { return r.mean_log_summary; }
double min_ess(const SummaryRow& r) { return r.min_ess; }
double wall_time(const SummaryRow& r) { return r.wall_time_s; }
double divergences(const SummaryRow& r) { return static_cast<double>(r.divergences); }

Axes strip_axes(const std::vector<SummaryRow>& rows, double (*value)(const SummaryRow&), double top, bool from_zero) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows) {
    const double v = value(r);
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (from_zero && std::isfinite(lo)) lo = std::min(lo, 0.0);
  auto [ylo, yhi] = padded(lo, hi);
  if (from_zero) ylo = std::max(ylo, std::min(lo, 0.0));
  return {kLeft, top, kPanelW, kPanelH, 0.0, 1.0, ylo, yhi};
}

std::string summary_figure(const std::vector<SummaryRow>& rows) {
  const auto params = present(rows);
  const auto qs = q_values(rows);
  const double height = kTop + 3 * kPanelH + 2 * kGap + 50;
  Svg svg(kLeft + kPanelW + kRight, height);
  struct Spec {
    const char* name;
    double (*value)(const SummaryRow&);
    bool from_zero;
  };
  const Spec specs[] = {{"mean log summary", mean_log_summary, false},
                        {"min ESS", min_ess, true},
                        {"wall time (s)", wall_time, true}};
  for (int i = 0; i < 3; ++i) {
    const double top = kTop + i * (kPanelH + kGap);
    const Axes a = strip_axes(rows, specs[i].value, top, specs[i].from_zero);
    svg.axes(a, specs[i].name, false, i == 2 ? "q" : "");
    strip_panel(svg, a, rows, qs, params, specs[i].value);
  }
  svg.legend(kLeft + kPanelW + 25, kTop + 20, params);
  return svg.str("Per-chain summaries by q and parametrization");
}

std::string divergence_figure(const std::vector<SummaryRow>& rows) {
  const auto params = present(rows);
  const auto qs = q_values(rows);
  Svg svg(kLeft + kPanelW + kRight, kTop + kPanelH + 60);
  const Axes a = strip_axes(rows, divergences, kTop, true);
  svg.axes(a, "divergences", false, "q");
  strip_panel(svg, a, rows, qs, params, divergences);
  svg.legend(kLeft + kPanelW + 25, kTop + 20, params);
  return svg.str("Divergent transitions after warmup, per chain");
}

std::string kde_figure(const std::vector<KdeRow>& kde, double plot_q) {
  // nearest available q
  double best = std::numeric_limits<double>::infinity(), q_used = plot_q;
  for (const auto& r : kde) {
    if (std::abs(r.q - plot_q) < best) {
      best = std::abs(r.q - plot_q);
      q_used = r.q;
    }
  }
  std::map<std::pair<Parametrization, std::size_t>, std::vector<std::pair<double, double>>> curves;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ymax = 0.0;
  for (const auto& r : kde) {
    if (std::abs(r.q - q_used) > 1e-9 || !std::isfinite(r.grid_point) || !std::isfinite(r.density)) continue;
    curves[{r.parametrization, r.chain}].emplace_back(r.grid_point, r.density);
    xlo = std::min(xlo, r.grid_point);
    xhi = std::max(xhi, r.grid_point);
    ymax = std::max(ymax, r.density);
  }
  std::vector<Parametrization> params;
  for (const auto& [key, pts] : curves) {
    if (std::find(params.begin(), params.end(), key.first) == params.end()) params.push_back(key.first);
  }
  const double height = kTop + static_cast<double>(params.size()) * (kPanelH + kGap) + 10;
  Svg svg(kLeft + kPanelW + kRight, height);
  // one x-range pooled over every chain so panels line up
  const double yhi = ymax > 0.0 ? ymax * 1.05 : 1.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Axes a{kLeft, kTop + static_cast<double>(i) * (kPanelH + kGap), kPanelW, kPanelH, xlo, xhi, 0.0, yhi};
    // data range (before any padding) kept machine readable for checks
    svg.open_group("data-xrange=\"" + format_number(xlo) + " " + format_number(xhi) + "\"");
    svg.axes(a, "density", true, "log summary");
    svg.text(a.x0 + a.w + 10, a.y0 + 16, std::string(to_string(params[i])), "start", 12);
    for (const auto& [key, pts] : curves) {
      if (key.first != params[i]) continue;
      std::vector<std::pair<double, double>> px;
      px.reserve(pts.size());
      for (const auto& [x, y] : pts) px.emplace_back(a.px(x), a.py(y));
      svg.polyline(px, color(key.first));
    }
    svg.close_group();
  }
  return svg.str("Per-chain density of the log summary at q = " + label(q_used));
}

}  // namespace

SvgFigures render_figures(const std::vector<SummaryRow>& summary, const std::vector<KdeRow>& kde, double plot_q) {
  std::vector<SummaryRow> ok;
  for (const auto& r : summary) {
    if (r.status == "ok") ok.push_back(r);
  }
  if (ok.empty()) throw std::invalid_argument("summary has no successful rows to plot");
  if (kde.empty()) throw std::invalid_argument("no KDE rows to plot");
  return {summary_figure(ok), kde_figure(kde, plot_q), divergence_figure(ok)};
}

std::vector<std::string> write_figures(const SvgFigures& figures, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  const std::pair<const char*, const std::string*> files[] = {
      {"fig1_summary.svg", &figures.summary}, {"fig2_kde.svg", &figures.kde}, {"fig3_divergences.svg", &figures.divergences}};
  for (const auto& [name, content] : files) {
    const auto path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << *content;
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::string> plot_summary(const std::string& summary_path, const std::string& kde_path,
                                      const std::string& out_dir, double plot_q) {
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  const auto summary = parse_summary_csv(slurp(summary_path));
  const auto kde = parse_kde_csv(slurp(kde_path));
  if (summary.empty()) throw DataError("summary file '" + summary_path + "' has no rows");
  return write_figures(render_figures(summary, kde, plot_q), out_dir);
}

}  // namespace epmix
