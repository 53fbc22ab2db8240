#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace normgrad {

// One line of the experiment CSV. Doubles are serialized with %.17g so a
// rerun with the same config and seed reproduces the file byte for byte,
// except for the wall-clock column.
struct TraceRow {
    std::string method;
    int run_id = 0;
    long iter = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
    double rho = 0.0;
    double sin2 = 0.0;
    double g = 0.0;
    double stepsize = 0.0;
    std::int64_t wall_ns = 0;
};

class TraceFile {
public:
    void add(TraceRow row);
    const std::vector<TraceRow>& rows() const { return rows_; }

    // Enforces strictly increasing iter per (method, run_id) before writing.
    void write(const std::string& path) const;
    static TraceFile read(const std::string& path);

    // Per-(method, iter) quantiles of objective and grad_norm across runs
    // (5th, 50th, 95th percentile), written as a companion CSV.
    void write_summary(const std::string& path) const;

private:
    std::vector<TraceRow> rows_;
};

// CSV text with the wall_ns column removed from the header and every row;
// the determinism comparisons byte-compare this form.
std::string strip_wall_column(const std::string& csv_text);

std::string read_text_file(const std::string& path);

}  // namespace normgrad
