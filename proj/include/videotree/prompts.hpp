#pragma once

#include <string>
#include <vector>

#include "videotree/qa_types.hpp"

namespace videotree {

// The two prompt templates are fixed wording; only the bracketed slots vary.
// Rendering is a pure function of (captions, task, examples) and must stay
// byte-stable: golden tests pin the exact output.

inline constexpr const char* kRelevancePromptTemplate =
    "You are presented with a textual description of a first view video clip, it consists of "
    "about {caption_number} frame captions sparsely sampled from the video (#C means the first "
    "person view, and #O indicates another). The ultimate goal is to answer a question related "
    "to this video, choosing the correct option out of five possible answers.\n"
    "It is crucial that you imagine the visual scene as vividly as possible to enhance the "
    "accuracy of your response. After selecting your answer, rate your confidence level in this "
    "choice on a scale from 1 to 100, where 1 indicates low confidence and 100 signifies high "
    "confidence. Please provide a concise one-sentence explanation for your chosen answer. If "
    "you are uncertain about the correct option, select the one that seems closest to being "
    "correct. Meanwhile, could you provide a relevance score for each frame caption to evaluate "
    "their relevance with the query-answering process. The score is between 1,2,3, where 1 "
    "indicates low relevance and 3 signifies high relevance. Please return the relevance score "
    "in the format of a list of {caption_number} scores.\n"
    "{examples_block}"
    "Description:\n{captions}\n"
    "Question: {question}\n"
    "Options: A: {option_a}. B: {option_b}. C: {option_c}. D: {option_d}. E: {option_e}.\n"
    "The prediction, explanation, confidence and frame relevance are (please response in the "
    "format of 'prediction:, explanation:, confidence:, frame relevance:')";

inline constexpr const char* kQaPromptTemplate =
    "You are presented with a textual description of a first view video clip, it consists of "
    "frame captions sparsely sampled from the video (#C means the first person view, and #O "
    "indicates another). The ultimate goal is to answer a question related to this video, "
    "choosing the correct option out of five possible answers.\n"
    "It is crucial that you imagine the visual scene as vividly as possible to enhance the "
    "accuracy of your response. After selecting your answer, rate your confidence level in this "
    "choice on a scale from 1 to 100, where 1 indicates low confidence and 100 signifies high "
    "confidence. Please provide a concise one-sentence explanation for your chosen answer. If "
    "you are uncertain about the correct option, select the one that seems closest to being "
    "correct.\n"
    "{examples_block}"
    "Description:\n{captions}\n"
    "Question: {question}\n"
    "Options: A: {option_a}. B: {option_b}. C: {option_c}. D: {option_d}. E: {option_e}.\n"
    "The prediction, explanation, and confidence is (please response in the format of "
    "'prediction:, explanation: ,confidence:')";

namespace detail {

inline void replace_all(std::string& text, const std::string& slot, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(slot, pos)) != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos += value.size();
    }
}

inline std::string join_caption_lines(const std::vector<Caption>& captions) {
    std::string out;
    for (std::size_t i = 0; i < captions.size(); ++i) {
        if (i > 0) out += "\n";
        out += captions[i].text;
    }
    return out;
}

inline std::string fill_prompt(const char* tmpl, const std::vector<Caption>& captions,
                               const QATask& task, const std::string& examples) {
    std::string prompt = tmpl;
    replace_all(prompt, "{caption_number}", std::to_string(captions.size()));
    replace_all(prompt, "{examples_block}",
                examples.empty() ? "" : "Examples: " + examples + "\n");
    replace_all(prompt, "{captions}", join_caption_lines(captions));
    replace_all(prompt, "{question}", task.question);
    replace_all(prompt, "{option_a}", task.options[0]);
    replace_all(prompt, "{option_b}", task.options[1]);
    replace_all(prompt, "{option_c}", task.options[2]);
    replace_all(prompt, "{option_d}", task.options[3]);
    replace_all(prompt, "{option_e}", task.options[4]);
    return prompt;
}

}  // namespace detail

// Captions must already be in temporal order; rendering never reorders them.
inline std::string render_relevance_prompt(const std::vector<Caption>& captions,
                                           const QATask& task,
                                           const std::string& examples = "") {
    return detail::fill_prompt(kRelevancePromptTemplate, captions, task, examples);
}

inline std::string render_qa_prompt(const std::vector<Caption>& captions, const QATask& task,
                                    const std::string& examples = "") {
    return detail::fill_prompt(kQaPromptTemplate, captions, task, examples);
}

}  // namespace videotree
