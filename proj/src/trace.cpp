#include "normgrad/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace normgrad {

namespace {

constexpr const char* kHeader =
    "method,run_id,iter,objective,grad_norm,rho,sin2,g,stepsize,wall_ns";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Linear-interpolation quantile on a sorted vector.
double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) throw std::logic_error("quantile of empty set");
    if (s.size() == 1) return s[0];
    double pos = q * static_cast<double>(s.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return s[lo] + frac * (s[hi] - s[lo]);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void TraceFile::add(TraceRow row) { rows_.push_back(std::move(row)); }

void TraceFile::write(const std::string& path) const {
    std::map<std::pair<std::string, int>, long> last_iter;
    for (const auto& r : rows_) {
        auto key = std::make_pair(r.method, r.run_id);
        auto it = last_iter.find(key);
        if (it != last_iter.end() && r.iter <= it->second) {
            throw std::logic_error("trace iters not strictly increasing for " +
                                   r.method + "/" + std::to_string(r.run_id));
        }
        last_iter[key] = r.iter;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
    out << kHeader << "\n";
    for (const auto& r : rows_) {
        out << r.method << ',' << r.run_id << ',' << r.iter << ','
            << fmt_double(r.objective) << ',' << fmt_double(r.grad_norm) << ','
            << fmt_double(r.rho) << ',' << fmt_double(r.sin2) << ','
            << fmt_double(r.g) << ',' << fmt_double(r.stepsize) << ','
            << r.wall_ns << "\n";
    }
    if (!out) throw std::runtime_error("failed writing trace file: " + path);
}

TraceFile TraceFile::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path);
    if (line != kHeader) throw std::runtime_error("unexpected trace header in " + path);
    TraceFile tf;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 10) throw std::runtime_error("malformed trace row: " + line);
        TraceRow r;
        r.method = f[0];
        r.run_id = std::stoi(f[1]);
        r.iter = std::stol(f[2]);
        r.objective = std::stod(f[3]);
        r.grad_norm = std::stod(f[4]);
        r.rho = std::stod(f[5]);
        r.sin2 = std::stod(f[6]);
        r.g = std::stod(f[7]);
        r.stepsize = std::stod(f[8]);
        r.wall_ns = std::stoll(f[9]);
        tf.rows_.push_back(std::move(r));
    }
    return tf;
}

void TraceFile::write_summary(const std::string& path) const {
    // (method, iter) -> samples across run_ids
    std::map<std::pair<std::string, long>, std::pair<std::vector<double>, std::vector<double>>> buckets;
    for (const auto& r : rows_) {
        auto& b = buckets[{r.method, r.iter}];
        b.first.push_back(r.objective);
        b.second.push_back(r.grad_norm);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open summary file for writing: " + path);
    out << "method,iter,objective_q05,objective_q50,objective_q95,"
           "grad_norm_q05,grad_norm_q50,grad_norm_q95\n";
    for (auto& [key, b] : buckets) {
        std::sort(b.first.begin(), b.first.end());
        std::sort(b.second.begin(), b.second.end());
        out << key.first << ',' << key.second;
        for (double q : {0.05, 0.5, 0.95}) out << ',' << fmt_double(quantile_sorted(b.first, q));
        for (double q : {0.05, 0.5, 0.95}) out << ',' << fmt_double(quantile_sorted(b.second, q));
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing summary file: " + path);
}

std::string strip_wall_column(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        auto pos = line.rfind(',');
        out << (pos == std::string::npos ? line : line.substr(0, pos)) << "\n";
    }
    return out.str();
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace normgrad
