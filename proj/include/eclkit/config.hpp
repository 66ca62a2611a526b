#pragma once

#include "eclkit/integrator.hpp"
#include "eclkit/models.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace eclkit {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class InitialKind { GaussianBump, PlaneWave, FromFile };

struct InitialCondition {
    InitialKind kind = InitialKind::GaussianBump;
    double center = -1.0;  // < 0 means the middle of the domain
    double width = 1.0;
    double amplitude = 1.0;
    int mode = 1;
    std::size_t component = 0;
    std::filesystem::path path;  // from_file: CSV, one row per grid point
};

struct ExperimentConfig {
    std::string model_name;
    ModelParams model_params;
    std::size_t n_points = 64;
    double dx = 0.1;
    InitialCondition initial;

    /// Empty kind means the model's default scheme.
    std::optional<DiscreteGradientKind> scheme_kind;
    int quadrature_nodes = 0;  // 0: chosen from the density degree
    std::optional<BaselineMethod> baseline;

    StepConfig step;
    std::size_t n_steps = 100;

    std::filesystem::path csv_path;
    std::filesystem::path json_path;

    /// Raw key/value pairs as read, for the report echo.
    std::vector<std::pair<std::string, std::string>> echo;

    Grid grid() const { return Grid(n_points, dx); }
    ModelInstance model() const;
    ModelInstance model_on(const Grid& grid) const;
    DiscreteGradientScheme scheme_for(const ModelInstance& model) const;
    Stepper stepper_for(const ModelInstance& model) const;
};

/// Parses INI text. Relative paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& file);

/// Initial state on the model's grid, with dependent components filled.
GridFunction initial_state(const ExperimentConfig& cfg, const ModelInstance& model);

} // namespace eclkit
