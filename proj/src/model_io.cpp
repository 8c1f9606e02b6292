#include "enfo/model_io.hpp"

#include "enfo/error.hpp"

#include <fstream>

namespace enfo {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    require(j.is_array(), "matrix must be a JSON array of rows");
    const Index n = static_cast<Index>(j.size());
    const Index d = n > 0 ? static_cast<Index>(j.at(0).size()) : 0;
    Matrix m(n, d);
    for (Index i = 0; i < n; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        require(row.is_array() && static_cast<Index>(row.size()) == d, "ragged matrix rows");
        for (Index k = 0; k < d; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

json vector_to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const json& j) {
    require(j.is_array(), "vector must be a JSON array");
    const auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

json to_json(const Standardization& s) {
    return json{{"feature_mean", vector_to_json(s.feature_mean)},
                {"feature_std", vector_to_json(s.feature_std)},
                {"target_mean", s.target_mean},
                {"target_std", s.target_std}};
}

Standardization standardization_from_json(const json& j) {
    Standardization s;
    s.feature_mean = vector_from_json(j.at("feature_mean"));
    s.feature_std = vector_from_json(j.at("feature_std"));
    s.target_mean = j.at("target_mean").get<double>();
    s.target_std = j.at("target_std").get<double>();
    return s;
}

json to_json(const NuMethodModel& model) {
    json j{{"schema_version", kModelSchemaVersion},
           {"family", to_string(model.kernel.family)},
           {"bandwidth", model.kernel.bandwidth},
           {"nu", model.nu},
           {"iterations", model.iterations},
           {"support_points", matrix_to_json(model.support_points)},
           {"alpha", vector_to_json(model.alpha)}};
    j["standardization"] = model.standardization ? to_json(*model.standardization) : json(nullptr);
    return j;
}

NuMethodModel nu_model_from_json(const json& j) {
    try {
        NuMethodModel m;
        m.kernel.family = kernel_family_from_string(j.at("family").get<std::string>());
        m.kernel.bandwidth = j.at("bandwidth").get<double>();
        m.nu = j.at("nu").get<double>();
        m.iterations = j.at("iterations").get<int>();
        m.support_points = matrix_from_json(j.at("support_points"));
        m.alpha = vector_from_json(j.at("alpha"));
        if (j.contains("standardization") && !j.at("standardization").is_null()) {
            m.standardization = standardization_from_json(j.at("standardization"));
        }
        validate(m);
        return m;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed model JSON: ") + e.what());
    }
}

void save_model(const NuMethodModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open " + path.string() + " for writing");
    out << to_json(model).dump(2) << '\n';
}

NuMethodModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("cannot parse " + path.string() + ": " + e.what());
    }
    return nu_model_from_json(j);
}

}  // namespace enfo
