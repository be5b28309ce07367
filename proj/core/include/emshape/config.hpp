#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "emshape/shapeopt.hpp"

namespace emshape {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parsed run configuration: flat `key = value` entries under bracketed
/// section headers. Every key has a default; unknown keys are hard errors.
class RunConfig {
public:
    RunConfig() = default;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_string(const std::string& text, const std::string& label = "<config>");

    /// FNV-1a hash of the raw configuration text, for the run manifest.
    std::uint64_t text_hash() const { return hash_; }

    Mesh make_mesh() const;
    MaterialTable make_materials(const Mesh& mesh) const;
    DriveSpec make_drive() const;
    StateOptions make_state_options() const;
    AdjointOptions make_adjoint_options(const Mesh& mesh) const;
    OptimizeOptions make_optimize_options(const Mesh& mesh) const;
    FdCheckOptions make_fd_options() const;

    double fd_gate() const { return get_double("shapeopt.fd_gate"); }
    int max_iterations() const { return get_int("shapeopt.max_iters"); }
    std::string output_directory() const { return get_string("output.directory"); }
    bool write_vtk() const { return get_bool("output.write_vtk"); }
    int vtk_every() const { return get_int("output.vtk_every"); }

    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::string get_string(const std::string& key) const;

private:
    std::map<std::string, std::string> values_;  // "section.key" -> raw text
    std::uint64_t hash_ = 0;

    void validate_keys() const;
};

}  // namespace emshape
