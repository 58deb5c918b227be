#pragma once

#include "roughwave/error.hpp"
#include "roughwave/profile.hpp"
#include "roughwave/profile_m2.hpp"
#include "roughwave/scenario.hpp"
#include "roughwave/simulator.hpp"

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace roughwave {

/*
 * Profile CSV:
 *   # model,fbar,case,trace_minus,trace_plus
 *   # M1,0.1875,A1,0.375,0.75
 *   [# kink left_slope=..,right_slope=..,predicted_jump=..,observed_jump=..,relative_error=..]
 *   x,Q
 *   rows; a jump node at x = 0 is written twice, left trace first.
 *
 * Snapshot CSV:
 *   # t=<time>
 *   x,rho
 *   one row per cell centre.
 */

inline void write_profile_csv(std::ostream& out, const Profile& p, const std::optional<KinkReport>& kink = std::nullopt)
{
    const GridFunction& g = p.grid;
    out << "# model,fbar,case,trace_minus,trace_plus\n";
    out << "# " << to_string(p.model) << ',' << format_double(p.fbar) << ','
        << (p.case_tag ? p.case_tag->label : std::string("none")) << ',' << format_double(p.trace_minus) << ','
        << format_double(p.trace_plus) << '\n';
    if (kink)
        out << "# kink left_slope=" << format_double(kink->left_slope)
            << ",right_slope=" << format_double(kink->right_slope)
            << ",predicted_jump=" << format_double(kink->predicted_jump)
            << ",observed_jump=" << format_double(kink->observed_jump)
            << ",relative_error=" << format_double(kink->relative_error) << '\n';
    out << "x,Q\n";
    const auto z = g.zero_index();
    for (std::ptrdiff_t i = 0; i < g.size(); ++i) {
        // Anchor x at the zero node so x = 0 prints exactly.
        const double x = z ? static_cast<double>(i - *z) * g.dx : g.x(i);
        if (z && i == *z && g.left_trace_at_zero)
            out << format_double(x) << ',' << format_double(*g.left_trace_at_zero) << '\n';
        out << format_double(x) << ',' << format_double(g.values[static_cast<std::size_t>(i)]) << '\n';
    }
}

inline void write_snapshot_csv(std::ostream& out, const SimState& s)
{
    out << "# t=" << format_double(s.t) << '\n';
    out << "x,rho\n";
    for (std::size_t j = 0; j < s.size(); ++j)
        out << format_double(s.x_center(j)) << ',' << format_double(s.cells[j]) << '\n';
}

/// Parsed contents of a profile or snapshot CSV.
struct CsvTable {
    std::vector<std::string> comments; ///< comment lines without the leading "# "
    std::vector<std::string> columns;
    std::vector<double> x;
    std::vector<double> y;
    std::size_t header_lines = 0; ///< lines before the first data row
};

inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            t.comments.push_back(std::string(detail::trim(std::string_view(line).substr(1))));
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
            throw Error(Errc::io, "line " + std::to_string(line_no) + ": expected two columns");
        if (t.columns.empty()) {
            t.columns = {line.substr(0, comma), line.substr(comma + 1)};
            t.header_lines = line_no;
            continue;
        }
        try {
            t.x.push_back(detail::parse_number(std::string_view(line).substr(0, comma), "x"));
            t.y.push_back(detail::parse_number(std::string_view(line).substr(comma + 1), t.columns[1]));
        } catch (const Error&) {
            throw Error(Errc::io, "line " + std::to_string(line_no) + ": malformed number");
        }
    }
    if (t.columns.empty())
        throw Error(Errc::io, "no column header found");
    return t;
}

inline CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::missing_file, "cannot open " + path.string());
    return read_csv(in);
}

/// Writes through a temporary name so readers never see a partial file.
template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& fn)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw Error(Errc::io, "cannot write " + tmp.string());
        fn(out);
        out.flush();
        if (!out)
            throw Error(Errc::io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, [&](std::ostream& out) { out << text; });
}

} // namespace roughwave
