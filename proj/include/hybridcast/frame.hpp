#pragma once

// Date-indexed panels of named series, CSV ingest and calendar alignment.

#include "hybridcast/numcore.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace hybridcast {

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD. Throws DataError on anything else or an invalid day.
Date parse_date(const std::string& text);
std::string format_date(Date d);

// Date-indexed panel. `values` is rows x columns; NaN marks a missing cell,
// which is only legal in fragments that have not been aligned yet.
struct TimeSeriesFrame {
    std::vector<Date> dates;
    std::vector<std::string> names;
    MatrixXd values;
    std::string target_name;

    Index rows() const { return static_cast<Index>(dates.size()); }
    Index cols() const { return static_cast<Index>(names.size()); }
    // Throws DataError for an unknown name.
    Index column_index(const std::string& name) const;
    VectorXd column(const std::string& name) const;

    // Strictly increasing dates, consistent sizes and, unless
    // `allow_missing`, no NaN cells. Throws DataError.
    void validate(bool allow_missing = false) const;

    // Copy restricted to the named columns (in the given order).
    TimeSeriesFrame select(const std::vector<std::string>& columns) const;

    // "date,<names...>" with %.17g values; missing cells left empty.
    std::string to_csv() const;
};

// Reads a headered CSV. `value_columns` empty means every non-date column.
// The fragment's target_name is its first value column. Rows are sorted by
// date; duplicate dates, bad dates and non-numeric cells throw DataError
// naming the offending row/column. Empty cells become NaN.
TimeSeriesFrame load_csv_series(const std::filesystem::path& path,
                                const std::string& date_column = "date",
                                const std::vector<std::string>& value_columns = {});

TimeSeriesFrame parse_csv_series(const std::string& text, const std::string& source,
                                 const std::string& date_column = "date",
                                 const std::vector<std::string>& value_columns = {});

// Puts every exogenous column on the target's date index by forward fill.
// Leading target dates before an exogenous column's first observation are
// dropped. An exogenous fragment with no observation inside the target's
// date span throws DataError.
TimeSeriesFrame align_series(const TimeSeriesFrame& target,
                             const std::vector<TimeSeriesFrame>& exogenous);

}  // namespace hybridcast
