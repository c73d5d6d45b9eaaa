#include "iconary/report.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

namespace iconary::report {

using nlohmann::json;

namespace {

std::string opt(const std::optional<double>& v, int digits = 1) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("n/a");
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::string format_count(std::size_t n) {
  if (n < 1000) return std::to_string(n);
  const double k = static_cast<double>(n) / 1000.0;
  if (k >= 10.0) return fmt::format("{:.0f}k", k);
  return fmt::format("{:.1f}k", k);
}

std::string dataset_table(const metrics::DatasetStats& stats) {
  std::ostringstream out;
  out << fmt::format("{:<10} {:>7} {:>8} {:>6} {:>11}\n", "Dataset", "Games", "Phrases", "Win", "Off-by-One");
  for (const auto& s : stats.splits) {
    out << fmt::format("{:<10} {:>7} {:>8} {:>6} {:>11}\n", to_string(s.split), format_count(s.games),
                       format_count(s.unique_phrases), opt(s.win_pct), opt(s.off_by_one_pct));
  }
  out << "\n"
      << fmt::format("{:<10} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7}\n", "Split", ">=2", ">=3", ">=4", "Edit", "Add",
                     "Redraw");
  for (const auto& s : stats.splits) {
    out << fmt::format("{:<10} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7}\n", to_string(s.split), opt(s.rounds_ge2_pct),
                       opt(s.rounds_ge3_pct), opt(s.rounds_ge4_pct), opt(s.edit_pct), opt(s.add_pct),
                       opt(s.redraw_pct));
  }
  out << "\nwin-definition cross-check (all words eventually / one exact guess / recorded outcome)\n";
  for (const auto& s : stats.splits) {
    out << fmt::format("{:<10} {:>6} {:>6} {:>6}\n", to_string(s.split), opt(s.win_pct), opt(s.exact_phrase_win_pct),
                       opt(s.recorded_win_pct));
  }
  if (stats.splits.empty()) out << "(empty corpus: all rates undefined)\n";
  return out.str();
}

json to_json(const metrics::DatasetStats& stats) {
  json splits = json::array();
  for (const auto& s : stats.splits) {
    splits.push_back({{"split", std::string(to_string(s.split))},
                      {"games", s.games},
                      {"unique_phrases", s.unique_phrases},
                      {"win_pct", opt_json(s.win_pct)},
                      {"off_by_one_pct", opt_json(s.off_by_one_pct)},
                      {"exact_phrase_win_pct", opt_json(s.exact_phrase_win_pct)},
                      {"recorded_win_pct", opt_json(s.recorded_win_pct)},
                      {"rounds_ge2_pct", opt_json(s.rounds_ge2_pct)},
                      {"rounds_ge3_pct", opt_json(s.rounds_ge3_pct)},
                      {"rounds_ge4_pct", opt_json(s.rounds_ge4_pct)},
                      {"multi_drawing_games", s.multi_drawing_games},
                      {"edit_pct", opt_json(s.edit_pct)},
                      {"add_pct", opt_json(s.add_pct)},
                      {"redraw_pct", opt_json(s.redraw_pct)}});
  }
  return {{"total_games", stats.total_games}, {"splits", splits}};
}

std::string dataset_csv(const metrics::DatasetStats& stats) {
  std::ostringstream out;
  out << "split,games,unique_phrases,win_pct,off_by_one_pct,rounds_ge2_pct,rounds_ge3_pct,rounds_ge4_pct,"
         "edit_pct,add_pct,redraw_pct\n";
  auto c = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); };
  for (const auto& s : stats.splits) {
    out << to_string(s.split) << ',' << s.games << ',' << s.unique_phrases << ',' << c(s.win_pct) << ','
        << c(s.off_by_one_pct) << ',' << c(s.rounds_ge2_pct) << ',' << c(s.rounds_ge3_pct) << ','
        << c(s.rounds_ge4_pct) << ',' << c(s.edit_pct) << ',' << c(s.add_pct) << ',' << c(s.redraw_pct) << '\n';
  }
  return out.str();
}

std::string metrics_table(const metrics::MetricsReport& r) {
  auto p = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("n/a"); };
  std::ostringstream out;
  out << r.name << ": " << r.games << " games";
  if (r.skipped) out << " (" << r.skipped << " skipped)";
  out << "\n";
  if (r.win_rate) out << fmt::format("  win          {}\n", p(r.win_rate));
  if (r.soft_win_rate) out << fmt::format("  soft win     {}\n", p(r.soft_win_rate));
  if (r.off_by_one_rate) out << fmt::format("  off-by-one   {}\n", p(r.off_by_one_rate));
  if (r.icon_f1) out << fmt::format("  icon F1      {}\n", p(r.icon_f1));
  if (r.perplexity) out << fmt::format("  perplexity   {:.3f}\n", *r.perplexity);
  if (!r.curve.empty()) {
    out << fmt::format("  {:>9} {:>7} {:>9}\n", r.curve_unit, "win", "soft win");
    for (const auto& c : r.curve) {
      out << fmt::format("  {:>9} {:>7} {:>9}\n", c.cutoff ? std::to_string(c.cutoff) : "unlimited", p(c.win),
                         p(c.soft_win));
    }
  }
  for (const auto& n : r.notes) out << "  note: " << n << "\n";
  return out.str();
}

json to_json(const metrics::MetricsReport& r) {
  json curve = json::array();
  for (const auto& c : r.curve) {
    curve.push_back({{"cutoff", c.cutoff}, {"win", opt_json(c.win)}, {"soft_win", opt_json(c.soft_win)},
                     {"games", c.games}});
  }
  return {{"name", r.name},
          {"games", r.games},
          {"skipped", r.skipped},
          {"win_rate", opt_json(r.win_rate)},
          {"soft_win_rate", opt_json(r.soft_win_rate)},
          {"off_by_one_rate", opt_json(r.off_by_one_rate)},
          {"icon_f1", opt_json(r.icon_f1)},
          {"perplexity", opt_json(r.perplexity)},
          {"curve_unit", r.curve_unit},
          {"curve", curve},
          {"notes", r.notes}};
}

std::string metrics_csv(const metrics::MetricsReport& r) {
  auto c = [](const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string(); };
  std::ostringstream out;
  out << "metric,cutoff,value\n";
  out << "win_rate,," << c(r.win_rate) << "\n";
  out << "soft_win_rate,," << c(r.soft_win_rate) << "\n";
  out << "off_by_one_rate,," << c(r.off_by_one_rate) << "\n";
  out << "icon_f1,," << c(r.icon_f1) << "\n";
  out << "perplexity,," << c(r.perplexity) << "\n";
  for (const auto& p : r.curve) {
    out << "win_at," << p.cutoff << ',' << c(p.win) << "\n";
    out << "soft_win_at," << p.cutoff << ',' << c(p.soft_win) << "\n";
  }
  return out.str();
}

json to_json(const metrics::HumanAiScores& s) {
  auto curve = [](const std::vector<metrics::CutoffPoint>& pts) {
    json a = json::array();
    for (const auto& c : pts) {
      a.push_back({{"cutoff", c.cutoff}, {"win", opt_json(c.win)}, {"soft_win", opt_json(c.soft_win)},
                   {"games", c.games}});
    }
    return a;
  };
  return {{"guesser_curve", curve(s.guesser_curve)},
          {"drawer_curve", curve(s.drawer_curve)},
          {"ignored_games", s.ignored_games}};
}

std::string human_ai_table(const metrics::HumanAiScores& s) {
  std::ostringstream out;
  auto rows = [&](const char* title, const char* unit, const std::vector<metrics::CutoffPoint>& pts) {
    out << title << "\n" << fmt::format("  {:>9} {:>7} {:>9} {:>6}\n", unit, "win", "soft", "games");
    for (const auto& c : pts) {
      out << fmt::format("  {:>9} {:>7} {:>9} {:>6}\n", c.cutoff ? std::to_string(c.cutoff) : "unlimited",
                         opt(c.win ? std::optional<double>(*c.win * 100) : std::nullopt),
                         opt(c.soft_win ? std::optional<double>(*c.soft_win * 100) : std::nullopt), c.games);
    }
  };
  rows("AI Guesser", "guesses", s.guesser_curve);
  rows("AI Drawer", "drawings", s.drawer_curve);
  return out.str();
}

std::string curve_svg(const std::string& title, const std::string& x_label,
                      const std::vector<metrics::CutoffPoint>& points) {
  std::vector<metrics::CutoffPoint> pts;
  for (const auto& p : points) {
    if (p.cutoff != 0) pts.push_back(p);
  }
  const double w = 480, h = 320, left = 56, right = 16, top = 36, bottom = 48;
  const double pw = w - left - right, ph = h - top - bottom;
  double max_x = 1;
  for (const auto& p : pts) max_x = std::max(max_x, static_cast<double>(p.cutoff));
  auto sx = [&](double x) { return left + x / max_x * pw; };
  auto sy = [&](double y) { return top + (1.0 - y) * ph; };

  std::ostringstream out;
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", w, h,
                     w, h)
      << "\n";
  out << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", w, h) << "\n";
  out << fmt::format(R"(<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>)",
                     w / 2, title)
      << "\n";
  out << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", left, sy(0), left + pw, sy(0))
      << "\n";
  out << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", left, sy(0), left, sy(1)) << "\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{:.0f}</text>)",
                       left - 6, sy(y) + 3, y * 100)
        << "\n";
  }
  for (const auto& p : pts) {
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>)",
                       sx(static_cast<double>(p.cutoff)), sy(0) + 14, p.cutoff)
        << "\n";
  }
  out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>)",
                     left + pw / 2, h - 10, x_label)
      << "\n";
  auto polyline = [&](bool soft, const char* dash) {
    std::string coords;
    for (const auto& p : pts) {
      const auto& v = soft ? p.soft_win : p.win;
      if (!v) continue;
      coords += fmt::format("{:.1f},{:.1f} ", sx(static_cast<double>(p.cutoff)), sy(*v));
    }
    out << fmt::format(R"(<polyline fill="none" stroke="#1f5fa8" stroke-width="2" {} points="{}"/>)", dash, coords)
        << "\n";
  };
  polyline(false, "");
  polyline(true, R"(stroke-dasharray="6,4")");
  out << "</svg>\n";
  return out.str();
}

}  // namespace iconary::report
