#pragma once

// BER result files: a fixed-schema CSV, a JSON metadata sidecar, and an
// optional matplotlib script that plots the CSV.

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "aecomm/harness.hpp"

namespace aecomm {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr const char* kCsvHeader = "link,channel,ebn0_db,bits,errors,ber,stderr,censored,seed";

/// One CSV row.
struct BerRow {
    std::string link;
    std::string channel;
    BerPoint point;
};

inline std::vector<BerRow> make_rows(const LinkUnderTest& link, const std::vector<BerPoint>& points)
{
    std::vector<BerRow> rows;
    for (const auto& p : points) rows.push_back({link.name(), to_string(link.channel), p});
    return rows;
}

namespace detail {

inline std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing: " + std::strerror(errno));
    return out;
}

inline double parse_double(const std::string& field, const std::string& context)
{
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || *end != '\0') throw std::runtime_error(context + ": bad number '" + field + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& field, const std::string& context)
{
    char* end = nullptr;
    const unsigned long long v = std::strtoull(field.c_str(), &end, 10);
    if (field.empty() || *end != '\0') throw std::runtime_error(context + ": bad integer '" + field + "'");
    return v;
}

}  // namespace detail

inline std::string format_csv(const std::vector<BerRow>& rows)
{
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        const auto& p = r.point;
        out << r.link << ',' << r.channel << ',' << detail::format_double(p.ebn0_db) << ',' << p.bits << ','
            << p.errors << ',' << detail::format_double(p.ber) << ',' << detail::format_double(p.standard_error)
            << ',' << (p.censored ? 1 : 0) << ',' << p.seed << '\n';
    }
    return out.str();
}

inline std::vector<BerRow> parse_csv(std::istream& in, const std::string& source = "csv")
{
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::runtime_error(source + ": missing or unexpected header");
    std::vector<BerRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        const std::string ctx = source + ":" + std::to_string(lineno);
        if (f.size() != 9) throw std::runtime_error(ctx + ": expected 9 fields");
        BerRow r;
        r.link = f[0];
        r.channel = f[1];
        r.point.ebn0_db = detail::parse_double(f[2], ctx);
        r.point.bits = detail::parse_u64(f[3], ctx);
        r.point.errors = detail::parse_u64(f[4], ctx);
        r.point.ber = detail::parse_double(f[5], ctx);
        r.point.standard_error = detail::parse_double(f[6], ctx);
        r.point.censored = f[7] == "1";
        r.point.seed = detail::parse_u64(f[8], ctx);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<BerRow> read_results(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    return parse_csv(in, path.string());
}

inline std::filesystem::path metadata_path(const std::filesystem::path& csv)
{
    return std::filesystem::path(csv.string() + ".meta.json");
}

inline std::string plot_script(const std::filesystem::path& csv)
{
    std::ostringstream s;
    s << "import csv, collections\n"
         "import matplotlib\n"
         "matplotlib.use('Agg')\n"
         "import matplotlib.pyplot as plt\n\n"
         "curves = collections.defaultdict(list)\n"
         "with open(" << std::quoted(csv.filename().string()) << ") as f:\n"
         "    for row in csv.DictReader(f):\n"
         "        if float(row['ber']) > 0:\n"
         "            curves[row['link'] + ' / ' + row['channel']].append((float(row['ebn0_db']), float(row['ber'])))\n"
         "for name, pts in curves.items():\n"
         "    xs, ys = zip(*sorted(pts))\n"
         "    plt.semilogy(xs, ys, marker='o', label=name)\n"
         "plt.xlabel('Eb/N0 [dB]')\n"
         "plt.ylabel('BER')\n"
         "plt.grid(True, which='both')\n"
         "plt.legend()\n"
         "plt.savefig(" << std::quoted(csv.stem().string() + ".png") << ", dpi=150)\n";
    return s.str();
}

/// Writes the CSV, `<path>.meta.json`, and optionally `<stem>.plot.py` next to it.
inline void write_results(const std::vector<BerRow>& rows, const nlohmann::json& metadata,
                          const std::filesystem::path& path, bool with_plot_script = false)
{
    {
        auto out = detail::open_for_write(path);
        out << format_csv(rows);
        if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
    }
    nlohmann::json meta = metadata;
    meta["artifact"] = "aecomm";
    meta["artifact_version"] = kArtifactVersion;
    meta["snr_axis"] = "Eb/N0 [dB]; noise variance per real dimension beta = 1 / (2 * r * 10^(EbN0/10)), "
                       "r = information bits per unit transmitted energy";
    {
        auto out = detail::open_for_write(metadata_path(path));
        out << meta.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed for '" + metadata_path(path).string() + "'");
    }
    if (with_plot_script) {
        auto script_path = path.parent_path() / (path.stem().string() + ".plot.py");
        auto out = detail::open_for_write(script_path);
        out << plot_script(path);
    }
}

}  // namespace aecomm
