#include "ebda/errors.hpp"
#include "ebda/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ebda {
namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Quotes a CSV field when it holds a separator, quote or line break.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string safe_file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? std::string("sequence") : out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

void bd_row(std::ostringstream& s, const std::string& seq, const std::string& codec,
            const char* variant, const std::optional<BdResult>& bd, const std::string& diagnostic) {
  s << csv_field(seq) << ',' << csv_field(codec) << ',' << variant << ',';
  if (bd) {
    s << fixed(bd->rate_percent, 4) << ',' << fixed(bd->psnr_db, 4) << ",ok\n";
  } else {
    s << ",," << csv_field(diagnostic.empty() ? "incomplete" : "incomplete: " + diagnostic) << '\n';
  }
}

}  // namespace

std::string rd_csv(const PipelineReport& report) {
  std::ostringstream s;
  s << "sequence,codec,qp_base,effective_qp,bitrate_kbps,psnr_y\n";
  const std::string anchor = csv_field(report.codec_name);
  const std::string ebda = csv_field(report.codec_name + "+ebda");
  for (const auto& seq : report.sequences) {
    const std::string name = csv_field(seq.name);
    for (const auto& p : seq.points) {
      if (!p.ok) continue;
      s << name << ',' << anchor << ',' << p.qp_base << ',' << p.anchor_qp << ','
        << fixed(p.anchor.bitrate_kbps, 6) << ',' << fixed(p.anchor.psnr, 6) << '\n';
      s << name << ',' << ebda << ',' << p.qp_base << ',' << p.ebda_qp << ','
        << fixed(p.ebda.bitrate_kbps, 6) << ',' << fixed(p.ebda.psnr, 6) << '\n';
    }
  }
  return s.str();
}

std::string bd_csv(const PipelineReport& report) {
  std::ostringstream s;
  s << "sequence,codec,variant,bd_rate_percent,bd_psnr_db,status\n";
  std::vector<BdResult> ebda_all, naive_all;
  for (const auto& seq : report.sequences) {
    bd_row(s, seq.name, report.codec_name, "ebda", seq.ebda_bd, seq.bd_diagnostic);
    bd_row(s, seq.name, report.codec_name, "naive", seq.naive_bd, seq.bd_diagnostic);
    if (seq.ebda_bd) ebda_all.push_back(*seq.ebda_bd);
    if (seq.naive_bd) naive_all.push_back(*seq.naive_bd);
  }
  if (report.sequences.size() > 1) {
    const auto mean = [](const std::vector<BdResult>& v) -> std::optional<BdResult> {
      if (v.empty()) return std::nullopt;
      BdResult m;
      for (const auto& r : v) {
        m.rate_percent += r.rate_percent;
        m.psnr_db += r.psnr_db;
      }
      m.rate_percent /= static_cast<double>(v.size());
      m.psnr_db /= static_cast<double>(v.size());
      return m;
    };
    const bool all = ebda_all.size() == report.sequences.size();
    const std::string note = all ? "" : "some sequences missing";
    bd_row(s, "average", report.codec_name, "ebda", all ? mean(ebda_all) : std::nullopt, note);
    bd_row(s, "average", report.codec_name, "naive",
           naive_all.size() == report.sequences.size() ? mean(naive_all) : std::nullopt, note);
  }
  return s.str();
}

std::string summary_text(const PipelineReport& report) {
  std::ostringstream s;
  s << "codec: " << report.codec_name << '\n';
  s << "status: " << (report.all_ok() ? "complete" : "INCOMPLETE") << "\n\n";
  for (const auto& seq : report.sequences) {
    s << "sequence " << seq.name << '\n';
    s << "  qp  model   anchor kbps  anchor dB     ebda kbps    ebda dB   naive dB\n";
    for (const auto& p : seq.points) {
      s << "  " << std::setw(2) << p.qp_base << "  " << std::setw(5) << to_string(p.model);
      if (!p.ok) {
        s << "  FAILED: " << p.diagnostic << '\n';
        continue;
      }
      s << std::setw(14) << fixed(p.anchor.bitrate_kbps, 3) << std::setw(11) << fixed(p.anchor.psnr, 3)
        << std::setw(14) << fixed(p.ebda.bitrate_kbps, 3) << std::setw(11) << fixed(p.ebda.psnr, 3)
        << std::setw(11) << fixed(p.naive_psnr, 3) << '\n';
    }
    if (seq.ebda_bd && seq.naive_bd) {
      s << "  BD-rate ebda " << fixed(seq.ebda_bd->rate_percent, 2) << "%  BD-PSNR ebda "
        << fixed(seq.ebda_bd->psnr_db, 3) << " dB\n";
      s << "  BD-rate naive " << fixed(seq.naive_bd->rate_percent, 2) << "%  BD-PSNR naive "
        << fixed(seq.naive_bd->psnr_db, 3) << " dB\n";
    } else {
      s << "  BD metrics unavailable: " << (seq.bd_diagnostic.empty() ? "incomplete" : seq.bd_diagnostic)
        << '\n';
    }
    s << '\n';
  }
  return s.str();
}

std::string rd_svg(const SequenceReport& sequence) {
  struct Series {
    const char* label;
    const char* colour;
    std::vector<RDPoint> points;
  };
  std::vector<Series> series = {{"anchor", "#1f77b4", {}}, {"ebda", "#d62728", {}}, {"naive", "#2ca02c", {}}};
  for (const auto& p : sequence.points) {
    if (!p.ok) continue;
    series[0].points.push_back(p.anchor);
    series[1].points.push_back(p.ebda);
    series[2].points.push_back({p.ebda.bitrate_kbps, p.naive_psnr});
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (auto& sr : series) {
    std::sort(sr.points.begin(), sr.points.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.bitrate_kbps < b.bitrate_kbps; });
    for (const auto& p : sr.points) {
      x0 = std::min(x0, p.bitrate_kbps);
      x1 = std::max(x1, p.bitrate_kbps);
      y0 = std::min(y0, p.psnr);
      y1 = std::max(y1, p.psnr);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.5, y1 += 0.5;

  constexpr double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\">" << xml_escape(sequence.name)
    << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    s << "<text x=\"" << fixed(px(xv), 1) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
      << fixed(xv, 1) << "</text>\n";
    s << "<text x=\"" << L - 6 << "\" y=\"" << fixed(py(yv) + 4, 1) << "\" text-anchor=\"end\">"
      << fixed(yv, 2) << "</text>\n";
  }
  s << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">bitrate (kbps)</text>\n";
  s << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << H / 2
    << ")\">Y-PSNR (dB)</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& sr = series[i];
    s << "<polyline fill=\"none\" stroke=\"" << sr.colour << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : sr.points) s << fixed(px(p.bitrate_kbps), 2) << ',' << fixed(py(p.psnr), 2) << ' ';
    s << "\"/>\n";
    for (const auto& p : sr.points) {
      s << "<circle cx=\"" << fixed(px(p.bitrate_kbps), 2) << "\" cy=\"" << fixed(py(p.psnr), 2)
        << "\" r=\"3\" fill=\"" << sr.colour << "\"/>\n";
    }
    const double ly = T + 16.0 * static_cast<double>(i);
    s << "<text x=\"" << L + 12 << "\" y=\"" << ly + 4 << "\" fill=\"" << sr.colour << "\">" << sr.label
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_report(const PipelineReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  write_text(dir / "rd.csv", rd_csv(report));
  write_text(dir / "bd.csv", bd_csv(report));
  write_text(dir / "summary.txt", summary_text(report));
  for (const auto& seq : report.sequences) {
    write_text(dir / (safe_file_stem(seq.name) + "_rd.svg"), rd_svg(seq));
  }
}

}  // namespace ebda
