#include <algorithm>
#include <cstdio>
#include <sstream>

#include "plcrnn/cost/complexity.hpp"
#include "plcrnn/error.hpp"

namespace plcrnn::cost {

std::string millions(std::uint64_t count) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(count) / 1e6);
    return buf;
}

std::string render_report(const CostReport& r, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::Machine) {
        os << "# cost-report\t" << (r.name.empty() ? "unnamed" : r.name) << "\tframes=" << r.frames << "\n";
        os << "# layer\tkind\tgroup\tparams\tfmas\n";
        for (const auto& row : r.rows) {
            os << row.layer << '\t' << row.kind << '\t' << (row.group.empty() ? "-" : row.group) << '\t' << row.params
               << '\t' << row.fmas << '\n';
        }
        os << "total\t-\t-\t" << r.total_params << '\t' << r.total_fmas << '\n';
        return os.str();
    }

    std::size_t wl = 5, wk = 4, wg = 5;
    for (const auto& row : r.rows) {
        wl = std::max(wl, row.layer.size());
        wk = std::max(wk, row.kind.size());
        wg = std::max(wg, row.group.size());
    }
    auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                    const std::string& e) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%-*s  %-*s  %-*s  %14s  %14s\n", static_cast<int>(wl), a.c_str(),
                      static_cast<int>(wk), b.c_str(), static_cast<int>(wg), c.c_str(), d.c_str(), e.c_str());
        os << buf;
    };
    os << "Cost report: " << (r.name.empty() ? "unnamed" : r.name) << " (FMAs for " << r.frames << " frame"
       << (r.frames == 1 ? "" : "s") << ")\n";
    line("layer", "kind", "share", "params", "fmas");
    for (const auto& row : r.rows) {
        const std::string group = row.group.empty() ? "" : (row.params == 0 ? row.group + "*" : row.group);
        line(row.layer, row.kind, group, std::to_string(row.params), std::to_string(row.fmas));
    }
    line("total", "", "", std::to_string(r.total_params), std::to_string(r.total_fmas));
    os << "* shared parameters counted at first use\n";
    os << "million: params " << millions(r.total_params) << " | fmas " << millions(r.total_fmas) << "\n";
    return os.str();
}

CostReport parse_report(std::string_view text) {
    CostReport r;
    std::istringstream is{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool have_total = false;
    std::uint64_t sum_p = 0, sum_f = 0;
    auto number = [&](const std::string& s) -> std::uint64_t {
        std::size_t pos = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) throw SpecError("report line " + std::to_string(lineno) + ": bad number '" + s + "'");
        return v;
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) f.push_back(cell);
        if (line[0] == '#') {
            if (f.size() == 3 && f[0] == "# cost-report") {
                r.name = f[1];
                if (f[2].rfind("frames=", 0) == 0) r.frames = number(f[2].substr(7));
            }
            continue;
        }
        if (f.size() != 5) throw SpecError("report line " + std::to_string(lineno) + ": expected 5 fields");
        if (have_total) throw SpecError("report line " + std::to_string(lineno) + ": rows after the total");
        if (f[0] == "total") {
            r.total_params = number(f[3]);
            r.total_fmas = number(f[4]);
            have_total = true;
            continue;
        }
        CostRow row{f[0], f[1], f[2] == "-" ? "" : f[2], number(f[3]), number(f[4])};
        sum_p += row.params;
        sum_f += row.fmas;
        r.rows.push_back(std::move(row));
    }
    if (!have_total) throw SpecError("report has no total row");
    if (sum_p != r.total_params || sum_f != r.total_fmas) throw SpecError("report total does not equal the row sums");
    return r;
}

}  // namespace plcrnn::cost
