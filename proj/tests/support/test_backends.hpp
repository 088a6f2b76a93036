#pragma once

// In-process backends for pipeline tests: callable-driven LLM and captioner
// stand-ins that plug into ModelGateway without touching the filesystem.

#include <cctype>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "videotree/model_gateway.hpp"

namespace test_support {

class LambdaLlm : public videotree::LlmClient {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit LambdaLlm(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const std::string& prompt) override { return fn_(prompt); }

private:
    Fn fn_;
};

class LambdaCaptioner : public videotree::CaptionClient {
public:
    using Fn = std::function<std::string(const std::string&, std::uint32_t)>;
    explicit LambdaCaptioner(Fn fn) : fn_(std::move(fn)) {}
    videotree::Caption fetch(const std::string& video_id, std::uint32_t frame) override {
        return videotree::Caption{frame, fn_(video_id, frame), videotree::CaptionSource::mock};
    }

private:
    Fn fn_;
};

inline videotree::BackendConfig inline_backend_config() {
    videotree::BackendConfig cfg;
    cfg.llm_endpoint = "mock:inline";
    cfg.captioner = "mock:inline";
    return cfg;
}

inline std::unique_ptr<videotree::ModelGateway> make_inline_gateway(
    LambdaLlm::Fn llm, LambdaCaptioner::Fn captioner) {
    return std::make_unique<videotree::ModelGateway>(
        inline_backend_config(), std::make_unique<LambdaLlm>(std::move(llm)),
        std::make_unique<LambdaCaptioner>(std::move(captioner)));
}

// The caption block sits between "Description:\n" and "\nQuestion: ".
inline std::vector<std::string> caption_lines_of(const std::string& prompt) {
    auto start = prompt.find("Description:\n");
    if (start == std::string::npos) return {};
    start += std::string("Description:\n").size();
    auto end = prompt.find("\nQuestion: ", start);
    if (end == std::string::npos) end = prompt.size();
    std::vector<std::string> lines;
    std::size_t pos = start;
    while (pos < end) {
        auto nl = prompt.find('\n', pos);
        if (nl == std::string::npos || nl > end) nl = end;
        lines.push_back(prompt.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

inline bool is_scoring_prompt(const std::string& prompt) {
    return prompt.find("frame relevance") != std::string::npos;
}

inline std::string relevance_response(const std::vector<int>& scores,
                                      const std::string& explanation = "scored") {
    std::string list;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (i) list += ", ";
        list += std::to_string(scores[i]);
    }
    return "prediction: A, explanation: " + explanation + ", confidence: 50, frame relevance: [" +
           list + "]";
}

inline std::vector<std::string> option_texts_of(const std::string& prompt) {
    auto pos = prompt.find("Options: A: ");
    if (pos == std::string::npos) return {};
    auto line_end = prompt.find('\n', pos);
    std::string line = prompt.substr(pos, line_end - pos);
    const char* markers[] = {"Options: A: ", ". B: ", ". C: ", ". D: ", ". E: "};
    std::vector<std::size_t> starts;
    std::size_t cursor = 0;
    for (const char* m : markers) {
        auto p = line.find(m, cursor);
        if (p == std::string::npos) return {};
        starts.push_back(p + std::string(m).size());
        cursor = p + 1;
    }
    std::vector<std::string> options;
    for (std::size_t i = 0; i < 5; ++i) {
        // Each option ends at the next ". X: " marker; E ends at the final '.'.
        std::size_t end = i + 1 < 5 ? line.find(markers[i + 1], starts[i]) : line.size() - 1;
        options.push_back(line.substr(starts[i], end - starts[i]));
    }
    return options;
}

inline std::set<std::string> word_tokens(const std::string& text) {
    std::set<std::string> tokens;
    std::string cur;
    for (char c : text + " ") {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            if (cur.size() >= 4) tokens.insert(cur);
            cur.clear();
        }
    }
    return tokens;
}

// QA rule: pick the option sharing the most distinct long tokens with the
// caption block; ties fall to the earlier option.
inline std::string keyword_qa_response(const std::string& prompt) {
    auto captions = caption_lines_of(prompt);
    std::string blob;
    for (const auto& c : captions) blob += c + "\n";
    auto caption_tokens = word_tokens(blob);
    auto options = option_texts_of(prompt);
    std::size_t best = 0, best_overlap = 0;
    for (std::size_t i = 0; i < options.size(); ++i) {
        std::size_t overlap = 0;
        for (const auto& tok : word_tokens(options[i]))
            if (caption_tokens.count(tok)) ++overlap;
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = i;
        }
    }
    char letter = static_cast<char>('A' + best);
    return std::string("prediction: ") + letter +
           ", explanation: keyword overlap, confidence: 70";
}

}  // namespace test_support
