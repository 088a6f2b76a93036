#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <type_traits>

#include "videotree/errors.hpp"
#include "videotree/model_gateway.hpp"
#include "videotree/pipeline_config.hpp"

namespace videotree {

// Merged view used by the CLI: pipeline knobs, backend wiring, asset paths.
// Loaded from a flat key/value file with [pipeline], [backends] and [paths]
// sections; command-line flags override file values.
struct CliConfig {
    PipelineConfig pipeline;
    BackendConfig backends;
    std::string asset_dir;
    std::string features;  // single-run feature file
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
    try {
        if constexpr (std::is_floating_point_v<T>)
            return static_cast<T>(std::stod(value));
        else if constexpr (std::is_signed_v<T>)
            return static_cast<T>(std::stoll(value));
        else
            return static_cast<T>(std::stoull(value));
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": " + value);
    }
}

}  // namespace detail

inline CliConfig load_cli_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());

    CliConfig cfg;
    std::string examples_file;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = detail::trim(detail::strip_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = body.substr(1, body.size() - 2);
            if (section != "pipeline" && section != "backends" && section != "paths")
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": unknown section [" + section + "]");
            continue;
        }
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::unquote(detail::trim(body.substr(eq + 1)));
        std::string qualified = section + "." + key;

        if (section == "pipeline") {
            if (key == "k_init")
                cfg.pipeline.k_init = detail::parse_number<std::uint32_t>(value, qualified);
            else if (key == "max_breadth")
                cfg.pipeline.max_breadth = detail::parse_number<std::uint32_t>(value, qualified);
            else if (key == "rele_num_thresh")
                cfg.pipeline.rele_num_thresh =
                    detail::parse_number<std::uint32_t>(value, qualified);
            else if (key == "branch_width")
                cfg.pipeline.branch_width = detail::parse_number<std::uint32_t>(value, qualified);
            else if (key == "max_depth")
                cfg.pipeline.max_depth = detail::parse_number<int>(value, qualified);
            else if (key == "seed")
                cfg.pipeline.seed = detail::parse_number<std::uint64_t>(value, qualified);
            else if (key == "fps")
                cfg.pipeline.fps = detail::parse_number<double>(value, qualified);
            else
                throw ConfigError("unknown key " + qualified);
        } else if (section == "backends") {
            if (key == "llm")
                cfg.backends.llm_endpoint = value;
            else if (key == "captioner")
                cfg.backends.captioner = value;
            else if (key == "model")
                cfg.backends.model_name = value;
            else if (key == "temperature")
                cfg.backends.temperature = detail::parse_number<double>(value, qualified);
            else if (key == "request_timeout")
                cfg.backends.request_timeout = detail::parse_number<double>(value, qualified);
            else if (key == "max_retries")
                cfg.backends.max_retries = detail::parse_number<int>(value, qualified);
            else if (key == "caption_snap_window")
                cfg.backends.caption_snap_window = detail::parse_number<int>(value, qualified);
            else if (key == "request_concurrency")
                cfg.backends.request_concurrency = detail::parse_number<int>(value, qualified);
            else if (key == "examples_file")
                examples_file = value;
            else
                throw ConfigError("unknown key " + qualified);
        } else if (section == "paths") {
            if (key == "asset_dir")
                cfg.asset_dir = value;
            else if (key == "features")
                cfg.features = value;
            else
                throw ConfigError("unknown key " + qualified);
        } else {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": key outside any section");
        }
    }

    // Relative paths in a config are relative to the config file, so a
    // bundled fixture directory works from any working directory.
    const std::filesystem::path base = path.parent_path();
    auto resolve = [&](std::string& value) {
        if (value.empty()) return;
        std::filesystem::path p = value;
        if (p.is_relative()) value = (base / p).string();
    };
    auto resolve_endpoint = [&](std::string& value) {
        for (const char* prefix : {"mock:", "store:"}) {
            if (value.rfind(prefix, 0) == 0) {
                std::string rest = value.substr(std::string(prefix).size());
                resolve(rest);
                value = prefix + rest;
                return;
            }
        }
    };
    resolve(cfg.asset_dir);
    resolve(cfg.features);
    resolve_endpoint(cfg.backends.llm_endpoint);
    resolve_endpoint(cfg.backends.captioner);

    if (!examples_file.empty()) {
        std::filesystem::path f = examples_file;
        if (f.is_relative()) f = base / f;
        std::ifstream ex(f);
        if (!ex) throw ConfigError("cannot open examples file: " + f.string());
        cfg.backends.examples.assign((std::istreambuf_iterator<char>(ex)),
                                     std::istreambuf_iterator<char>());
        cfg.backends.examples = detail::trim(cfg.backends.examples);
    }
    return cfg;
}

}  // namespace videotree
