#pragma once

namespace videotree {

// LLM-assigned score for a first-level cluster caption.
enum class RelevanceLevel : int { Low = 1, Medium = 2, High = 3 };

inline const char* relevance_name(RelevanceLevel r) {
    switch (r) {
        case RelevanceLevel::Low: return "low";
        case RelevanceLevel::Medium: return "medium";
        case RelevanceLevel::High: return "high";
    }
    return "?";
}

}  // namespace videotree
