#pragma once

#include "roughwave/csv.hpp"
#include "roughwave/error.hpp"

#include <cstddef>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace roughwave {

enum class PlotStyle { profiles, snapshots };

namespace detail {

inline std::string quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'')
            out += "''";
        else
            out += c;
    }
    return out + "'";
}

/// Index (among data rows) of the first x = 0 row, or -1.
inline std::ptrdiff_t first_zero_row(const CsvTable& t)
{
    for (std::size_t i = 0; i < t.x.size(); ++i)
        if (t.x[i] == 0.0)
            return static_cast<std::ptrdiff_t>(i);
    return -1;
}

} // namespace detail

/**
 * Gnuplot script drawing the given CSVs into `<script stem>.png`. Paths in the
 * script are relative to the script's directory. Profiles are drawn left and
 * right of x = 0 as separate segments with a dashed marker at x = 0;
 * snapshots are labelled with their time.
 */
inline std::string plot_script_text(const std::vector<std::filesystem::path>& csvs, PlotStyle style,
                                    const std::filesystem::path& script_path, const std::string& title)
{
    if (csvs.empty())
        throw Error(Errc::precondition, "plot script needs at least one artifact");
    const std::filesystem::path dir = script_path.parent_path();
    std::ostringstream gp;
    gp << "set datafile separator ','\n";
    gp << "set terminal pngcairo size 900,600\n";
    gp << "set output " << detail::quote(script_path.stem().string() + ".png") << '\n';
    gp << "set title " << detail::quote(title) << '\n';
    gp << "set xlabel 'x'\n";
    gp << "set ylabel " << (style == PlotStyle::profiles ? "'Q'" : "'rho'") << '\n';
    gp << "set key outside right\n";
    if (style == PlotStyle::profiles)
        gp << "set arrow from 0, graph 0 to 0, graph 1 nohead dashtype 2\n";
    gp << "plot ";
    for (std::size_t k = 0; k < csvs.size(); ++k) {
        if (!std::filesystem::exists(csvs[k]))
            throw Error(Errc::missing_file, "plot artifact " + csvs[k].string() + " does not exist");
        const CsvTable t = read_csv(csvs[k]);
        const std::string file = detail::quote(std::filesystem::relative(csvs[k], dir.empty() ? "." : dir).string());
        const std::string skip = " skip " + std::to_string(t.header_lines);
        if (k)
            gp << ", \\\n     ";
        if (style == PlotStyle::snapshots) {
            std::string label = csvs[k].stem().string();
            for (const std::string& c : t.comments)
                if (c.rfind("t=", 0) == 0)
                    label = c;
            gp << file << skip << " using 1:2 with lines lw 2 title " << detail::quote(label);
            continue;
        }
        std::string label = csvs[k].stem().string();
        if (t.comments.size() >= 2)
            label += " (" + t.comments[1] + ")";
        const std::ptrdiff_t z = detail::first_zero_row(t);
        if (z < 0) {
            gp << file << skip << " using 1:2 with lines lw 2 lc " << k + 1 << " title " << detail::quote(label);
            continue;
        }
        // A doubled zero row is a jump: the right segment starts at the second copy.
        const bool jump = static_cast<std::size_t>(z) + 1 < t.x.size() && t.x[static_cast<std::size_t>(z) + 1] == 0.0;
        const std::ptrdiff_t right_start = jump ? z + 1 : z;
        gp << file << skip << " using 1:(column(0) <= " << z << " ? $2 : 1/0) with lines lw 2 lc " << k + 1
           << " title " << detail::quote(label) << ", \\\n     ";
        gp << file << skip << " using 1:(column(0) >= " << right_start << " ? $2 : 1/0) with lines lw 2 lc " << k + 1
           << " notitle";
    }
    gp << '\n';
    return gp.str();
}

inline void emit_plot_script(const std::vector<std::filesystem::path>& csvs, PlotStyle style,
                             const std::filesystem::path& script_path, const std::string& title)
{
    write_text(script_path, plot_script_text(csvs, style, script_path, title));
}

} // namespace roughwave
