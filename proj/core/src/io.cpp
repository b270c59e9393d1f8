#include "hypar/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hypar/errors.hpp"

namespace hypar {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), r.ptr);
}

double parse_number(std::string_view text) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), x);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
        throw DomainError("not a number: '" + std::string(text) + "'");
    }
    return x;
}

namespace {

std::string hex(const unsigned char* p, unsigned n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * n);
    for (unsigned i = 0; i < n; ++i) {
        s.push_back(digits[p[i] >> 4]);
        s.push_back(digits[p[i] & 15]);
    }
    return s;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    return hex(md.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::string Table::csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

Table trajectory_table(const Trajectory& traj) {
    Table t{{"t", "q_x", "v_x", "q_p"}, {}};
    t.rows.reserve(traj.times.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const auto& s = traj.states[i];
        t.rows.push_back({traj.times[i], s.q_x, s.v_x, s.q_p});
    }
    return t;
}

Table segment_table(const SteadySegment& seg) {
    Table t{{"t", "q_x", "v_x", "q_p", "v_inp"}, {}};
    t.rows.reserve(seg.size());
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const auto& s = seg.states[i];
        t.rows.push_back({seg.time(i), s.q_x, s.v_x, s.q_p, seg.v_inp[i]});
    }
    return t;
}

Table spectrum_table(const Spectrum& spec) {
    Table t{{"omega", "magnitude", "re", "im", "power"}, {}};
    t.rows.reserve(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const auto a = spec.amp[k];
        t.rows.push_back({spec.omega[k], std::abs(a), a.real(), a.imag(), spec.power(k)});
    }
    return t;
}

Table intensity_long_table(const IntensityMap& map) {
    Table t{{"freq", "amp", "metric", "converged", "quasi_periodic", "spacing", "n"}, {}};
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            const auto& cell = map.at(r, c);
            t.rows.push_back({map.frequencies[c], map.amplitudes[r], cell.value,
                              cell.converged ? 1.0 : 0.0, cell.quasi_periodic ? 1.0 : 0.0,
                              cell.spacing, static_cast<double>(cell.n)});
        }
    }
    return t;
}

Table intensity_dense_table(const IntensityMap& map) {
    Table t;
    t.header.push_back("amp\\freq");
    for (double f : map.frequencies) t.header.push_back(format_number(f));
    for (std::size_t r = 0; r < map.rows(); ++r) {
        std::vector<double> row{map.amplitudes[r]};
        for (std::size_t c = 0; c < map.cols(); ++c) row.push_back(map.at(r, c).value);
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string intensity_gnuplot(const IntensityMap& map) {
    std::string out = "# freq amp " + std::string(to_string(map.metric)) + "\n";
    for (std::size_t r = 0; r < map.rows(); ++r) {
        for (std::size_t c = 0; c < map.cols(); ++c) {
            out += format_number(map.frequencies[c]) + ' ' + format_number(map.amplitudes[r]) +
                   ' ' + format_number(map.at(r, c).value) + '\n';
        }
        out += '\n';
    }
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace hypar
