#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "videotree/errors.hpp"
#include "videotree/relevance.hpp"

namespace videotree {

enum class CaptionSource { live, store, mock };

struct Caption {
    std::uint32_t frame_index = 0;
    std::string text;  // trimmed, non-empty
    CaptionSource source = CaptionSource::store;
};

// Multiple-choice question with exactly five options.
struct QATask {
    std::string uid;
    std::string video_id;
    std::string question;
    std::array<std::string, 5> options;
    std::optional<int> answer;  // 0..4 when ground truth is known
};

inline void validate(const QATask& task) {
    if (task.uid.empty()) throw FormatError("task uid must not be empty");
    if (task.answer && (*task.answer < 0 || *task.answer > 4))
        throw FormatError("task " + task.uid + ": answer index out of range");
}

struct AnswerRecord {
    char prediction = 'A';  // option letter A-E
    std::string explanation;
    int confidence = 1;  // [1, 100]
    std::optional<std::vector<RelevanceLevel>> relevance;  // present for scoring calls
    std::string raw_response;
    std::vector<std::string> parse_warnings;
};

inline void to_json(nlohmann::json& j, const AnswerRecord& rec) {
    j = nlohmann::json{{"confidence", rec.confidence},
                       {"explanation", rec.explanation},
                       {"parse_warnings", rec.parse_warnings},
                       {"prediction", std::string(1, rec.prediction)},
                       {"raw_response", rec.raw_response}};
    if (rec.relevance) {
        std::vector<int> vals;
        for (auto r : *rec.relevance) vals.push_back(static_cast<int>(r));
        j["relevance"] = vals;
    } else {
        j["relevance"] = nullptr;
    }
}

inline void from_json(const nlohmann::json& j, AnswerRecord& rec) {
    rec.prediction = j.at("prediction").get<std::string>().at(0);
    j.at("explanation").get_to(rec.explanation);
    j.at("confidence").get_to(rec.confidence);
    j.at("raw_response").get_to(rec.raw_response);
    j.at("parse_warnings").get_to(rec.parse_warnings);
    if (j.at("relevance").is_null()) {
        rec.relevance.reset();
    } else {
        std::vector<RelevanceLevel> vals;
        for (int v : j.at("relevance").get<std::vector<int>>())
            vals.push_back(static_cast<RelevanceLevel>(v));
        rec.relevance = std::move(vals);
    }
}

}  // namespace videotree
