#pragma once

#include <array>
#include <string>
#include <vector>

#include "scopekit/core.hpp"

namespace scopekit::data {

// The ten evaluation categories. The last three sit below the divider: they
// are never trained on, only used for out-of-distribution evaluation.
enum class Category { SA, TLD, S, TC, SC, DG, PE, QA, GSM8K, ALPACA };

inline constexpr std::array<Category, 10> kAllCategories = {
    Category::SA, Category::TLD, Category::S,  Category::TC,    Category::SC,
    Category::DG, Category::PE,  Category::QA, Category::GSM8K, Category::ALPACA};

inline constexpr std::array<Category, 7> kTrainableCategories = {
    Category::SA, Category::TLD, Category::S, Category::TC, Category::SC, Category::DG, Category::PE};

inline bool ood_only(Category c) {
    return c == Category::QA || c == Category::GSM8K || c == Category::ALPACA;
}

inline const char* category_token(Category c) {
    switch (c) {
        case Category::SA: return "SA";
        case Category::TLD: return "TLD";
        case Category::S: return "S";
        case Category::TC: return "TC";
        case Category::SC: return "SC";
        case Category::DG: return "DG";
        case Category::PE: return "PE";
        case Category::QA: return "QA";
        case Category::GSM8K: return "GSM8K";
        case Category::ALPACA: return "ALPACA";
    }
    return "?";
}

// Display names as they appear inside system prompts.
inline const char* category_display_name(Category c) {
    switch (c) {
        case Category::SA: return "Sentiment Analysis";
        case Category::TLD: return "Toxic Language Detection";
        case Category::S: return "Summarization";
        case Category::TC: return "Text Completion";
        case Category::SC: return "Story Composition";
        case Category::DG: return "Dialogue Generation";
        case Category::PE: return "Program Execution";
        case Category::QA: return "Question Answering";
        case Category::GSM8K: return "Grade School Math";
        case Category::ALPACA: return "General Assistance";
    }
    return "?";
}

inline Category parse_category(const std::string& s) {
    for (Category c : kAllCategories)
        if (s == category_token(c) || s == category_display_name(c)) return c;
    throw ConfigError("unknown category: " + s);
}

// Classification categories are scored with accuracy, the rest with Rouge-L.
inline bool scored_with_accuracy(Category c) { return c == Category::SA || c == Category::TLD; }

struct TaskInstance {
    std::string input;
    std::vector<std::string> outputs;  // >= 1 reference outputs
};

struct TaskRecord {
    std::string task_id;
    std::string dataset_id;  // groups tasks drawn from the same source dataset
    Category category = Category::SA;
    std::string definition;
    std::vector<TaskInstance> instances;

    void validate() const {
        if (task_id.empty()) throw DataError("TaskRecord: empty task_id");
        if (definition.empty()) throw DataError("TaskRecord " + task_id + ": empty definition");
        if (instances.empty()) throw DataError("TaskRecord " + task_id + ": no instances");
        for (const TaskInstance& ins : instances)
            if (ins.outputs.empty()) throw DataError("TaskRecord " + task_id + ": instance without outputs");
    }
};

}  // namespace scopekit::data
