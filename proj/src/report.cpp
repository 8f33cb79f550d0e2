// Copyright 2026  The pairsamp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "pairsamp/experiment.hpp"

#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pairsamp {

using detail::format_double;

void write_sweep_tsv(const std::string& axis, const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "axis\tvalue\tseed\tstatus\twithin_error\tacross_error\tbaseline_within\tbaseline_across"
         "\tcollapsed\n";
  for (const auto& r : rows)
    out << axis << '\t' << r.value << '\t' << r.seed << '\t' << r.status << '\t'
        << format_double(r.within_error) << '\t' << format_double(r.across_error) << '\t'
        << format_double(r.baseline_within) << '\t' << format_double(r.baseline_across) << '\t'
        << (r.collapsed ? 1 : 0) << '\n';
}

std::vector<SweepRow> read_sweep_tsv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<SweepRow> rows;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    const auto where = detail::location(path, line_no);
    const auto f = detail::split_fields(line, '\t');
    if (f.size() != 9) throw InputError(where + ": expected 9 tab-separated fields");
    SweepRow r;
    r.value = f[1];
    const long seed = detail::parse_long(f[2], where);
    if (seed < 0) throw InputError(where + ": negative seed");
    r.seed = static_cast<std::uint64_t>(seed);
    r.status = f[3];
    r.within_error = detail::parse_double(f[4], where);
    r.across_error = detail::parse_double(f[5], where);
    r.baseline_within = detail::parse_double(f[6], where);
    r.baseline_across = detail::parse_double(f[7], where);
    r.collapsed = detail::parse_long(f[8], where) != 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct Band {
  double mean = NAN, lo = NAN, hi = NAN;
};

Band band_of(const std::vector<double>& v) {
  std::vector<double> ok;
  for (double x : v)
    if (std::isfinite(x)) ok.push_back(x);
  if (ok.empty()) return {};
  Band b;
  b.mean = 0.0;
  for (double x : ok) b.mean += x;
  b.mean /= static_cast<double>(ok.size());
  const auto [lo, hi] = std::minmax_element(ok.begin(), ok.end());
  b.lo = *lo;
  b.hi = *hi;
  return b;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string sweep_svg(const std::string& axis, const std::vector<SweepRow>& rows) {
  // Values in first-appearance order.
  std::vector<std::string> values;
  for (const auto& r : rows)
    if (std::find(values.begin(), values.end(), r.value) == values.end()) values.push_back(r.value);

  struct Series {
    const char* name;
    const char* color;
    double SweepRow::*field;
  };
  const Series series[] = {{"within", "#1f77b4", &SweepRow::within_error},
                           {"across", "#d62728", &SweepRow::across_error},
                           {"baseline across", "#7f7f7f", &SweepRow::baseline_across}};

  std::vector<std::vector<Band>> bands;
  double y_max = 0.0;
  for (const auto& s : series) {
    std::vector<Band> per_value;
    for (const auto& v : values) {
      std::vector<double> xs;
      for (const auto& r : rows)
        if (r.value == v) xs.push_back(r.*s.field);
      per_value.push_back(band_of(xs));
      if (std::isfinite(per_value.back().hi)) y_max = std::max(y_max, per_value.back().hi);
    }
    bands.push_back(std::move(per_value));
  }
  y_max = y_max > 0.0 ? std::ceil(y_max * 10.0) / 10.0 : 0.5;

  constexpr double W = 640, H = 400, L = 60, R = 150, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  const auto xpos = [&](std::size_t i) {
    return values.size() <= 1 ? L + pw / 2 : L + pw * static_cast<double>(i) / (values.size() - 1);
  };
  const auto ypos = [&](double y) { return T + ph * (1.0 - y / y_max); };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
    << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double y = y_max * k / 5.0;
    o << "<text x=\"" << L - 8 << "\" y=\"" << ypos(y) + 4 << "\" text-anchor=\"end\">" << y
      << "</text>\n";
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    o << "<text x=\"" << xpos(i) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">"
      << escape(values[i]) << "</text>\n";
  o << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
    << escape(axis) << "</text>\n";
  o << "<text x=\"14\" y=\"" << T + ph / 2 << "\" transform=\"rotate(-90 14 " << T + ph / 2
    << ")\" text-anchor=\"middle\">ABX error</text>\n";

  for (std::size_t s = 0; s < bands.size(); ++s) {
    const auto& b = bands[s];
    std::ostringstream upper, lower, line;
    upper.precision(6);
    lower.precision(6);
    line.precision(6);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!std::isfinite(b[i].mean)) continue;
      upper << xpos(i) << ',' << ypos(b[i].hi) << ' ';
      line << xpos(i) << ',' << ypos(b[i].mean) << ' ';
    }
    for (std::size_t i = b.size(); i-- > 0;)
      if (std::isfinite(b[i].mean)) lower << xpos(i) << ',' << ypos(b[i].lo) << ' ';
    o << "<polygon points=\"" << upper.str() << lower.str() << "\" fill=\"" << series[s].color
      << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    o << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << series[s].color
      << "\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < b.size(); ++i)
      if (std::isfinite(b[i].mean))
        o << "<circle cx=\"" << xpos(i) << "\" cy=\"" << ypos(b[i].mean) << "\" r=\"3\" fill=\""
          << series[s].color << "\"/>\n";
    const double ly = T + 10 + 18.0 * static_cast<double>(s);
    o << "<line x1=\"" << L + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 35
      << "\" y2=\"" << ly << "\" stroke=\"" << series[s].color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << L + pw + 40 << "\" y=\"" << ly + 4 << "\">" << series[s].name
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_summary_tsv(const RunSummary& summary, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "metric\tvalue\n";
  for (const auto& a : summary.abx) {
    const std::string m(to_string(a.mode));
    out << m << "_error\t" << format_double(a.embedded_error) << '\n';
    out << m << "_baseline_error\t" << format_double(a.baseline_error) << '\n';
    out << m << "_cells\t" << a.n_cells << '\n';
  }
  out << "embedding_mean_cosine\t" << format_double(summary.embedding_mean_cosine) << '\n';
  out << "collapsed\t" << (summary.collapsed ? 1 : 0) << '\n';
  out << "initial_valid_loss\t" << format_double(summary.report.initial_valid_loss) << '\n';
  out << "best_epoch\t" << summary.report.best_epoch << '\n';
  out << "stopped_epoch\t" << summary.report.stopped_epoch << '\n';
}

RunSummary read_summary_tsv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  RunSummary summary;
  std::string line;
  long line_no = 0;
  const auto entry = [&](AbxMode mode) -> AbxSummary& {
    for (auto& a : summary.abx)
      if (a.mode == mode) return a;
    summary.abx.push_back({});
    summary.abx.back().mode = mode;
    return summary.abx.back();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || detail::trim(line).empty()) continue;
    const auto where = detail::location(path, line_no);
    const auto f = detail::split_fields(line, '\t');
    if (f.size() != 2) throw InputError(where + ": expected 'metric<TAB>value'");
    const auto& key = f[0];
    const auto us = key.find('_');
    const auto head = key.substr(0, us);
    if ((head == "within" || head == "across") && us != std::string::npos) {
      auto& a = entry(parse_abx_mode(head));
      const auto tail = key.substr(us + 1);
      if (tail == "error")
        a.embedded_error = detail::parse_double(f[1], where);
      else if (tail == "baseline_error")
        a.baseline_error = detail::parse_double(f[1], where);
      else if (tail == "cells")
        a.n_cells = detail::parse_long(f[1], where);
      else
        throw InputError(where + ": unknown metric " + key);
    } else if (key == "embedding_mean_cosine") {
      summary.embedding_mean_cosine = detail::parse_double(f[1], where);
    } else if (key == "collapsed") {
      summary.collapsed = detail::parse_long(f[1], where) != 0;
    } else if (key == "initial_valid_loss") {
      summary.report.initial_valid_loss = detail::parse_double(f[1], where);
    } else if (key == "best_epoch") {
      summary.report.best_epoch = static_cast<int>(detail::parse_long(f[1], where));
    } else if (key == "stopped_epoch") {
      summary.report.stopped_epoch = static_cast<int>(detail::parse_long(f[1], where));
    } else {
      throw InputError(where + ": unknown metric " + key);
    }
  }
  return summary;
}

}  // namespace pairsamp
