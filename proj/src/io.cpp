#include "ekflab/io.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ekflab {

using nlohmann::json;

namespace {

void append_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

Vector vector_from_json(const json& a) {
    if (!a.is_array()) throw std::invalid_argument("config: expected an array of numbers");
    Vector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

Matrix matrix_from_json(const json& a) {
    if (!a.is_array() || a.empty()) throw std::invalid_argument("config: expected a matrix (array of rows)");
    const std::size_t rows = a.size();
    const std::size_t cols = a[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!a[i].is_array() || a[i].size() != cols)
            throw std::invalid_argument("config: ragged matrix");
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
    }
    return m;
}

// Per-sample P eigenvalue range; derived from Q when P was not integrated.
void eig_range(const FilterRun& run, std::size_t k, double& eigmin, double& eigmax) {
    if (run.has_P()) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(run.P[k], Eigen::EigenvaluesOnly);
        eigmin = es.eigenvalues().minCoeff();
        eigmax = es.eigenvalues().maxCoeff();
    } else {
        Eigen::SelfAdjointEigenSolver<Matrix> es(run.Q[k], Eigen::EigenvaluesOnly);
        eigmin = 1.0 / es.eigenvalues().maxCoeff();
        eigmax = 1.0 / es.eigenvalues().minCoeff();
    }
}

}  // namespace

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

std::string trajectory_csv(const FilterRun& run) {
    const int n = run.x.empty() ? 0 : static_cast<int>(run.x.front().size());
    const int p = run.y.empty() ? 0 : static_cast<int>(run.y.front().size());

    std::string out;
    out.reserve(run.size() * (16 + 20 * (2 * n + p + 4)));
    out += "t";
    for (int i = 1; i <= n; ++i) out += ",x" + std::to_string(i);
    for (int i = 1; i <= n; ++i) out += ",xhat" + std::to_string(i);
    for (int i = 1; i <= p; ++i) out += ",y" + std::to_string(i);
    out += ",err,V,eigmin_P,eigmax_P\n";

    for (std::size_t k = 0; k < run.size(); ++k) {
        append_double(out, run.times[k]);
        for (int i = 0; i < n; ++i) {
            out += ',';
            append_double(out, run.x[k](i));
        }
        for (int i = 0; i < n; ++i) {
            out += ',';
            append_double(out, run.xhat[k](i));
        }
        for (int i = 0; i < p; ++i) {
            out += ',';
            append_double(out, run.y[k](i));
        }
        out += ',';
        append_double(out, run.error_norm[k]);
        out += ',';
        append_double(out, run.V[k]);
        double eigmin = 0, eigmax = 0;
        eig_range(run, k, eigmin, eigmax);
        out += ',';
        append_double(out, eigmin);
        out += ',';
        append_double(out, eigmax);
        out += '\n';
    }
    return out;
}

json trajectory_json(const FilterRun& run) {
    json j;
    j["times"] = run.times;
    j["x"] = json::array();
    j["xhat"] = json::array();
    j["y"] = json::array();
    j["innovation"] = json::array();
    for (std::size_t k = 0; k < run.size(); ++k) {
        j["x"].push_back(vector_to_json(run.x[k]));
        j["xhat"].push_back(vector_to_json(run.xhat[k]));
        j["y"].push_back(vector_to_json(run.y[k]));
        j["innovation"].push_back(vector_to_json(run.innovation[k]));
    }
    j["err"] = run.error_norm;
    j["V"] = run.V;
    json eigmin = json::array(), eigmax = json::array();
    for (std::size_t k = 0; k < run.size(); ++k) {
        double lo = 0, hi = 0;
        eig_range(run, k, lo, hi);
        eigmin.push_back(lo);
        eigmax.push_back(hi);
    }
    j["eigmin_P"] = eigmin;
    j["eigmax_P"] = eigmax;
    j["status"] = static_cast<int>(run.status);
    return j;
}

json diagnostics_to_json(const DiagnosticsReport& rep) {
    json j;
    j["m1_hat"] = rep.m1_hat;
    j["m5_hat"] = rep.m5_hat;
    j["m7"] = rep.m7;
    j["L"] = rep.L;
    if (std::isfinite(rep.radius))
        j["radius"] = rep.radius;
    else
        j["radius"] = nullptr;  // infinite: no second-derivative constraint
    if (rep.entry_time) j["entry_time"] = *rep.entry_time;
    if (rep.decay_rate) j["decay_rate"] = *rep.decay_rate;
    j["verdict"] = to_string(rep.verdict);
    j["initial_error"] = rep.initial_error;
    j["final_error"] = rep.final_error;
    j["max_error"] = rep.max_error;
    return j;
}

json scenario_to_json(const ScenarioConfig& config) {
    json j;
    j["scenario"] = config.name;
    j["system"] = config.system;
    j["truth_x0"] = vector_to_json(config.truth_x0);
    j["xhat0"] = vector_to_json(config.xhat0);
    j["P0"] = matrix_to_json(config.P0);
    j["G"] = matrix_to_json(config.G);
    j["u"] = {{"type", "zero"}};  // catalog scenarios all use u = 0
    switch (config.form) {
        case FilterForm::covariance: j["form"] = "covariance"; break;
        case FilterForm::information: j["form"] = "information"; break;
        case FilterForm::both: j["form"] = "both"; break;
    }
    j["integrator"] = {
        {"method", config.integrator.method == StepMethod::rk4_fixed ? "rk4_fixed" : "rk45_adaptive"},
        {"dt", config.integrator.dt},
        {"abs_tol", config.integrator.abs_tol},
        {"rel_tol", config.integrator.rel_tol},
        {"t_end", config.integrator.t_end},
        {"sample_stride", config.integrator.sample_stride},
    };
    j["expected"] = to_string(config.expected);
    j["diag_L"] = config.diag_L;
    return j;
}

ScenarioConfig scenario_from_json(const json& j, const ScenarioConfig& base) {
    static const std::vector<std::string> known = {
        "scenario", "system", "truth_x0", "xhat0", "P0", "G",
        "u",        "form",   "integrator", "expected", "diag_L"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::invalid_argument("config: unknown key '" + it.key() + "'");
    }

    ScenarioConfig c = base;
    if (j.contains("scenario")) c.name = j["scenario"].get<std::string>();
    if (j.contains("system")) c.system = j["system"].get<std::string>();
    if (j.contains("truth_x0")) c.truth_x0 = vector_from_json(j["truth_x0"]);
    if (j.contains("xhat0")) c.xhat0 = vector_from_json(j["xhat0"]);
    if (j.contains("P0")) c.P0 = matrix_from_json(j["P0"]);
    if (j.contains("G")) c.G = matrix_from_json(j["G"]);
    if (j.contains("u")) {
        const json& u = j["u"];
        const std::string type = u.value("type", "zero");
        if (type == "zero") {
            c.u = InputSignal::zero(u.value("dim", 0));
        } else if (type == "constant") {
            c.u = InputSignal::constant(vector_from_json(u.at("value")));
        } else if (type == "table") {
            std::vector<double> times = u.at("times").get<std::vector<double>>();
            std::vector<Vector> values;
            for (const auto& row : u.at("values")) values.push_back(vector_from_json(row));
            c.u = InputSignal::table(std::move(times), std::move(values));
        } else {
            throw std::invalid_argument("config: unknown input type '" + type + "'");
        }
    }
    if (j.contains("form")) {
        const std::string f = j["form"].get<std::string>();
        if (f == "covariance") c.form = FilterForm::covariance;
        else if (f == "information") c.form = FilterForm::information;
        else if (f == "both") c.form = FilterForm::both;
        else throw std::invalid_argument("config: unknown form '" + f + "'");
    }
    if (j.contains("integrator")) {
        const json& ji = j["integrator"];
        if (ji.contains("method")) {
            const std::string m = ji["method"].get<std::string>();
            if (m == "rk4_fixed") c.integrator.method = StepMethod::rk4_fixed;
            else if (m == "rk45_adaptive") c.integrator.method = StepMethod::rk45_adaptive;
            else throw std::invalid_argument("config: unknown integrator method '" + m + "'");
        }
        if (ji.contains("dt")) c.integrator.dt = ji["dt"].get<double>();
        if (ji.contains("abs_tol")) c.integrator.abs_tol = ji["abs_tol"].get<double>();
        if (ji.contains("rel_tol")) c.integrator.rel_tol = ji["rel_tol"].get<double>();
        if (ji.contains("t_end")) c.integrator.t_end = ji["t_end"].get<double>();
        if (ji.contains("sample_stride"))
            c.integrator.sample_stride = ji["sample_stride"].get<int>();
    }
    if (j.contains("expected")) {
        const std::string e = j["expected"].get<std::string>();
        if (e == "converge") c.expected = Expectation::converge;
        else if (e == "diverge") c.expected = Expectation::diverge;
        else if (e == "none") c.expected = Expectation::none;
        else throw std::invalid_argument("config: unknown expectation '" + e + "'");
    }
    if (j.contains("diag_L")) c.diag_L = j["diag_L"].get<double>();
    return c;
}

SampleSeries series_from_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty trajectory CSV");

    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        std::string col;
        while (std::getline(hs, col, ',')) header.push_back(col);
    }
    auto col_index = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("trajectory CSV is missing column '" + name + "'");
    };
    const int it = col_index("t");
    const int ierr = col_index("err");
    const int iV = col_index("V");
    const int ilo = col_index("eigmin_P");
    const int ihi = col_index("eigmax_P");

    SampleSeries s;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != header.size())
            throw std::invalid_argument("trajectory CSV row width mismatch");
        s.times.push_back(row[it]);
        s.error_norm.push_back(row[ierr]);
        s.V.push_back(row[iV]);
        s.eigmin_P.push_back(row[ilo]);
        s.eigmax_P.push_back(row[ihi]);
    }
    if (s.times.empty()) throw std::invalid_argument("trajectory CSV has no samples");
    return s;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_digest(const json& canonical_config) {
    const std::string bytes = canonical_config.dump();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

json manifest_to_json(const RunManifest& m) {
    json j;
    j["tool_version"] = m.tool_version;
    j["config_digest"] = m.config_digest;
    j["scenario"] = m.scenario;
    j["outputs"] = m.output_paths;
    j["duration_seconds"] = m.duration_seconds;
    j["verdict"] = m.verdict;
    return j;
}

}  // namespace ekflab
