#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlfd/mdp.hpp"

namespace rlfd {

/// Shortest text for a double that keeps 17 significant digits.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Neumaier-compensated running sum. Summing the same terms in the same order
/// always gives the same bits.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Coordinatewise compensated sum of equally sized vectors.
class KahanVector {
public:
    explicit KahanVector(Eigen::Index n = 0) : parts_(static_cast<std::size_t>(n)) {}
    void add(const Vector& v) {
        detail::require_size(static_cast<std::size_t>(v.size()), parts_.size(), "KahanVector");
        for (std::size_t i = 0; i < parts_.size(); ++i) parts_[i].add(v(static_cast<Eigen::Index>(i)));
    }
    Vector mean(std::size_t count) const {
        Vector out(static_cast<Eigen::Index>(parts_.size()));
        for (std::size_t i = 0; i < parts_.size(); ++i) {
            out(static_cast<Eigen::Index>(i)) = parts_[i].value() / static_cast<double>(count);
        }
        return out;
    }

private:
    std::vector<KahanSum> parts_;
};

// ---------------------------------------------------------------- MDP JSON

inline nlohmann::json mdp_to_json(const Mdp& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states();
    j["n_actions"] = mdp.n_actions();
    j["gamma"] = mdp.gamma();
    j["nu0"] = std::vector<double>(mdp.nu0().data(), mdp.nu0().data() + mdp.nu0().size());
    j["cost"] = std::vector<double>(mdp.cost().data(), mdp.cost().data() + mdp.cost().size());
    nlohmann::json rows = nlohmann::json::array();
    const Matrix& p = mdp.transition();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(p.cols()));
        for (Eigen::Index c = 0; c < p.cols(); ++c) row[static_cast<std::size_t>(c)] = p(r, c);
        rows.push_back(std::move(row));
    }
    j["transition"] = std::move(rows);
    return j;
}

inline Mdp mdp_from_json(const nlohmann::json& j) {
    try {
        const auto n_s = j.at("n_states").get<std::size_t>();
        const auto n_a = j.at("n_actions").get<std::size_t>();
        const auto gamma = j.at("gamma").get<double>();
        const auto nu0 = j.at("nu0").get<std::vector<double>>();
        const auto cost = j.at("cost").get<std::vector<double>>();
        const auto rows = j.at("transition").get<std::vector<std::vector<double>>>();
        detail::require_size(nu0.size(), n_s, "mdp json nu0");
        detail::require_size(cost.size(), n_s * n_a, "mdp json cost");
        detail::require_size(rows.size(), n_s * n_a, "mdp json transition rows");
        Matrix p(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_s));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            detail::require_size(rows[r].size(), n_s, "mdp json transition row");
            for (std::size_t c = 0; c < n_s; ++c) p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
        return Mdp(n_s, n_a, std::move(p), Eigen::Map<const Vector>(nu0.data(), static_cast<Eigen::Index>(n_s)),
                   Eigen::Map<const Vector>(cost.data(), static_cast<Eigen::Index>(cost.size())), gamma);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("mdp json: ") + e.what());
    }
}

/// Doubles are written with 17 significant digits, so reading back is exact.
inline std::string mdp_to_json_text(const Mdp& mdp) { return mdp_to_json(mdp).dump(2) + "\n"; }

inline Mdp mdp_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("mdp json: ") + e.what());
    }
    return mdp_from_json(j);
}

// ---------------------------------------------------------------- CSV

/// In-memory CSV table; cells are pre-formatted strings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    CsvTable& row() {
        rows_.emplace_back();
        rows_.back().reserve(columns_.size());
        return *this;
    }
    CsvTable& add(double x) { return push(format_double(x)); }
    CsvTable& add(std::size_t x) { return push(std::to_string(x)); }
    CsvTable& add(int x) { return push(std::to_string(x)); }
    CsvTable& add(const std::string& s) { return push(s); }
    CsvTable& add(const char* s) { return push(s); }

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t n_rows() const { return rows_.size(); }
    const std::vector<std::vector<std::string>>& rows() const { return rows_; }

    std::string str() const {
        std::ostringstream out;
        write_line(out, columns_);
        for (const auto& r : rows_) {
            if (r.size() != columns_.size()) throw Error("CsvTable: row width does not match the header");
            write_line(out, r);
        }
        return out.str();
    }

private:
    CsvTable& push(std::string s) {
        if (rows_.empty()) throw Error("CsvTable: add() before row()");
        rows_.back().push_back(std::move(s));
        return *this;
    }
    static void write_line(std::ostringstream& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rlfd
