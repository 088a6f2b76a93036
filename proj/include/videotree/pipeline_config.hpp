#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "videotree/errors.hpp"

namespace videotree {

struct PipelineConfig {
    std::uint32_t k_init = 8;
    std::uint32_t max_breadth = 32;
    std::uint32_t rele_num_thresh = 4;
    std::uint32_t branch_width = 4;
    int max_depth = 3;
    std::uint64_t seed = 0;
    double fps = 1.0;
};

inline void validate(const PipelineConfig& cfg) {
    if (cfg.k_init < 1) throw ConfigError("k_init must be positive");
    if (cfg.k_init > cfg.max_breadth) throw ConfigError("k_init must not exceed max_breadth");
    if (cfg.rele_num_thresh < 1) throw ConfigError("rele_num_thresh must be positive");
    if (cfg.rele_num_thresh > cfg.max_breadth)
        throw ConfigError("rele_num_thresh must not exceed max_breadth");
    if (cfg.branch_width < 2) throw ConfigError("branch_width must be >= 2");
    if (cfg.max_depth != 2 && cfg.max_depth != 3) throw ConfigError("max_depth must be 2 or 3");
    if (!(cfg.fps > 0.0)) throw ConfigError("fps must be positive");
}

inline void to_json(nlohmann::json& j, const PipelineConfig& cfg) {
    j = nlohmann::json{{"branch_width", cfg.branch_width},
                       {"fps", cfg.fps},
                       {"k_init", cfg.k_init},
                       {"max_breadth", cfg.max_breadth},
                       {"max_depth", cfg.max_depth},
                       {"rele_num_thresh", cfg.rele_num_thresh},
                       {"seed", cfg.seed}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& cfg) {
    j.at("branch_width").get_to(cfg.branch_width);
    j.at("fps").get_to(cfg.fps);
    j.at("k_init").get_to(cfg.k_init);
    j.at("max_breadth").get_to(cfg.max_breadth);
    j.at("max_depth").get_to(cfg.max_depth);
    j.at("rele_num_thresh").get_to(cfg.rele_num_thresh);
    j.at("seed").get_to(cfg.seed);
}

}  // namespace videotree
