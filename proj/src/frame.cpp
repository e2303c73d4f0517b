#include "hybridcast/frame.hpp"

#include "hybridcast/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace hybridcast {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(b, e - b + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
            cur.push_back(ch);
        } else if (ch == ',' && !quoted) {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

Date parse_date(const std::string& text) {
    const std::string s = trim(text);
    auto bad = [&] { return DataError("unparseable date '" + s + "' (expected YYYY-MM-DD)"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
    int y = 0;
    unsigned m = 0, d = 0;
    auto digits = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
        if (ec != std::errc() || ptr != s.data() + pos + len) throw bad();
    };
    digits(0, 4, y);
    digits(5, 2, m);
    digits(8, 2, d);
    const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) throw bad();
    return date;
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

Index TimeSeriesFrame::column_index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("unknown column '" + name + "'");
    return static_cast<Index>(it - names.begin());
}

VectorXd TimeSeriesFrame::column(const std::string& name) const {
    return values.col(column_index(name));
}

void TimeSeriesFrame::validate(bool allow_missing) const {
    if (values.rows() != rows() || values.cols() != cols()) {
        throw DataError("frame value matrix " + shape_string(values.rows(), values.cols()) +
                        " does not match " + std::to_string(rows()) + " dates x " +
                        std::to_string(cols()) + " columns");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw DataError("frame dates not strictly increasing at " + format_date(dates[i]));
        }
    }
    std::set<std::string> seen;
    for (const auto& n : names)
        if (!seen.insert(n).second) throw DataError("duplicate column name '" + n + "'");
    if (!allow_missing) {
        for (Index r = 0; r < values.rows(); ++r)
            for (Index c = 0; c < values.cols(); ++c)
                if (!std::isfinite(values(r, c))) {
                    throw DataError("missing or non-finite value in column '" +
                                    names[static_cast<std::size_t>(c)] + "' at " +
                                    format_date(dates[static_cast<std::size_t>(r)]));
                }
    }
}

TimeSeriesFrame TimeSeriesFrame::select(const std::vector<std::string>& columns) const {
    TimeSeriesFrame out;
    out.dates = dates;
    out.names = columns;
    out.target_name = target_name;
    out.values.resize(rows(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k)
        out.values.col(static_cast<Index>(k)) = values.col(column_index(columns[k]));
    return out;
}

std::string TimeSeriesFrame::to_csv() const {
    std::ostringstream os;
    os << "date";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    for (Index r = 0; r < rows(); ++r) {
        os << format_date(dates[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < cols(); ++c) {
            os << ',';
            if (std::isfinite(values(r, c))) os << io::format_double(values(r, c));
        }
        os << '\n';
    }
    return os.str();
}

TimeSeriesFrame parse_csv_series(const std::string& text, const std::string& source,
                                 const std::string& date_column,
                                 const std::vector<std::string>& value_columns) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw DataError(source + ": missing header row");
    }
    const std::vector<std::string> header = split_csv_line(line);
    const auto date_it = std::find(header.begin(), header.end(), date_column);
    if (date_it == header.end()) {
        throw DataError(source + ": no '" + date_column + "' column in header");
    }
    const std::size_t date_pos = static_cast<std::size_t>(date_it - header.begin());

    std::vector<std::size_t> positions;
    std::vector<std::string> names;
    if (value_columns.empty()) {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (k == date_pos) continue;
            positions.push_back(k);
            names.push_back(header[k]);
        }
    } else {
        for (const auto& name : value_columns) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw DataError(source + ": no column '" + name + "'");
            positions.push_back(static_cast<std::size_t>(it - header.begin()));
            names.push_back(name);
        }
    }
    if (names.empty()) throw DataError(source + ": no value columns");

    std::vector<std::pair<Date, std::vector<double>>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        }
        Date d;
        try {
            d = parse_date(cells[date_pos]);
        } catch (const DataError& e) {
            throw DataError(source + ": row " + std::to_string(line_no) + ": " + e.what());
        }
        std::vector<double> vals;
        vals.reserve(positions.size());
        for (std::size_t k = 0; k < positions.size(); ++k) {
            const std::string& cell = cells[positions[k]];
            double v = kMissing;
            if (!cell.empty() && !parse_number(cell, v)) {
                throw DataError(source + ": row " + std::to_string(line_no) + ", column '" +
                                names[k] + "': non-numeric cell '" + cell + "'");
            }
            vals.push_back(v);
        }
        rows.emplace_back(d, std::move(vals));
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first == rows[i - 1].first) {
            throw DataError(source + ": duplicate date " + format_date(rows[i].first));
        }
    }

    TimeSeriesFrame frame;
    frame.names = names;
    frame.target_name = names.front();
    frame.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        frame.dates.push_back(rows[r].first);
        for (std::size_t c = 0; c < names.size(); ++c)
            frame.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r].second[c];
    }
    return frame;
}

TimeSeriesFrame load_csv_series(const std::filesystem::path& path, const std::string& date_column,
                                const std::vector<std::string>& value_columns) {
    if (!std::filesystem::exists(path)) throw DataError("input file not found: " + path.string());
    return parse_csv_series(io::read_file(path), path.string(), date_column, value_columns);
}

TimeSeriesFrame align_series(const TimeSeriesFrame& target,
                             const std::vector<TimeSeriesFrame>& exogenous) {
    target.validate(true);
    if (target.rows() == 0) throw DataError("align_series: target has no rows");
    if (!target.values.allFinite()) {
        throw DataError("align_series: target series has missing values");
    }
    const Date first = target.dates.front();
    const Date last = target.dates.back();

    std::vector<std::string> names = target.names;
    std::vector<VectorXd> columns;
    for (Index c = 0; c < target.cols(); ++c) columns.push_back(target.values.col(c));
    // First target row at which every column has an observation.
    std::size_t start = 0;

    for (const auto& frag : exogenous) {
        frag.validate(true);
        const bool overlaps = std::any_of(frag.dates.begin(), frag.dates.end(),
                                          [&](Date d) { return first <= d && d <= last; });
        if (!overlaps) {
            const std::string label = frag.names.empty() ? "<empty>" : frag.names.front();
            throw DataError("align_series: exogenous series '" + label +
                            "' has no observations between " + format_date(first) + " and " +
                            format_date(last));
        }
        for (Index c = 0; c < frag.cols(); ++c) {
            VectorXd col(target.rows());
            std::size_t src = 0;
            double carry = kMissing;
            std::size_t first_valid = target.dates.size();
            for (std::size_t r = 0; r < target.dates.size(); ++r) {
                while (src < frag.dates.size() && frag.dates[src] <= target.dates[r]) {
                    const double v = frag.values(static_cast<Index>(src), c);
                    if (std::isfinite(v)) carry = v;
                    ++src;
                }
                col[static_cast<Index>(r)] = carry;
                if (std::isfinite(carry) && first_valid == target.dates.size()) first_valid = r;
            }
            if (first_valid == target.dates.size()) {
                throw DataError("align_series: column '" + frag.names[static_cast<std::size_t>(c)] +
                                "' has no observation on or before any target date");
            }
            start = std::max(start, first_valid);
            names.push_back(frag.names[static_cast<std::size_t>(c)]);
            columns.push_back(std::move(col));
        }
    }

    TimeSeriesFrame out;
    out.target_name = target.target_name;
    out.names = std::move(names);
    const Index n = target.rows() - static_cast<Index>(start);
    out.dates.assign(target.dates.begin() + static_cast<std::ptrdiff_t>(start), target.dates.end());
    out.values.resize(n, static_cast<Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c)
        out.values.col(static_cast<Index>(c)) = columns[c].tail(n);
    out.validate();
    return out;
}

}  // namespace hybridcast
