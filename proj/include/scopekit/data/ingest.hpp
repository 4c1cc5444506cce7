#pragma once

// Reads instruction-task files in the natural-instructions layout: a JSON
// object with a Definition (string, or list of strings whose first entry is
// used), Categories, and Instances of {input, output: [...]}. The task id is
// the file stem; Source (when present) groups tasks by origin dataset.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scopekit/core.hpp"
#include "scopekit/data/task.hpp"

namespace scopekit::data {

inline TaskRecord parse_task_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open task file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("task file " + path.string() + " is not valid JSON: " + e.what());
    }

    TaskRecord rec;
    rec.task_id = j.value("id", path.stem().string());

    if (!j.contains("Definition"))
        throw DataError("task file " + path.string() + " is missing its Definition");
    if (j["Definition"].is_array()) {
        if (j["Definition"].empty())
            throw DataError("task file " + path.string() + " has an empty Definition list");
        rec.definition = j["Definition"][0].get<std::string>();
    } else {
        rec.definition = j["Definition"].get<std::string>();
    }
    if (rec.definition.empty()) throw DataError("task file " + path.string() + " has an empty Definition");

    if (!j.contains("Categories") || j["Categories"].empty())
        throw DataError("task file " + path.string() + " is missing Categories");
    const auto& cat = j["Categories"].is_array() ? j["Categories"][0] : j["Categories"];
    try {
        rec.category = parse_category(cat.get<std::string>());
    } catch (const ConfigError& e) {
        throw DataError("task file " + path.string() + ": " + e.what());
    }

    if (j.contains("Source") && j["Source"].is_array() && !j["Source"].empty())
        rec.dataset_id = j["Source"][0].get<std::string>();
    else if (j.contains("Source") && j["Source"].is_string())
        rec.dataset_id = j["Source"].get<std::string>();
    else
        rec.dataset_id = rec.task_id;

    if (!j.contains("Instances") || !j["Instances"].is_array() || j["Instances"].empty())
        throw DataError("task file " + path.string() + " is missing Instances");
    for (const auto& inst : j["Instances"]) {
        TaskInstance ti;
        if (!inst.contains("input"))
            throw DataError("task file " + path.string() + " has an instance without input");
        ti.input = inst["input"].get<std::string>();
        if (!inst.contains("output") || !inst["output"].is_array() || inst["output"].empty())
            throw DataError("task file " + path.string() + " has an instance without reference outputs");
        for (const auto& o : inst["output"]) ti.outputs.push_back(o.get<std::string>());
        rec.instances.push_back(std::move(ti));
    }
    rec.validate();
    return rec;
}

struct IngestReport {
    std::vector<TaskRecord> records;
    std::vector<std::string> errors;  // one message per malformed file
};

// Reads every .json file under the directory (sorted by name). In strict
// mode the first malformed file raises; otherwise failures are collected in
// the report so nothing is silently dropped.
inline IngestReport ingest_tasks(const std::string& directory, bool strict = true) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw DataError("task directory does not exist: " + directory);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    IngestReport report;
    for (const fs::path& f : files) {
        try {
            report.records.push_back(parse_task_file(f));
        } catch (const DataError& e) {
            if (strict) throw;
            report.errors.emplace_back(e.what());
        }
    }
    return report;
}

inline void write_task_file(const TaskRecord& rec, const std::filesystem::path& path) {
    nlohmann::json j;
    j["id"] = rec.task_id;
    j["Definition"] = {rec.definition};
    j["Categories"] = {category_display_name(rec.category)};
    j["Source"] = {rec.dataset_id};
    j["Instances"] = nlohmann::json::array();
    for (const TaskInstance& ti : rec.instances)
        j["Instances"].push_back({{"input", ti.input}, {"output", ti.outputs}});
    std::ofstream os(path);
    if (!os) throw DataError("cannot write task file: " + path.string());
    os << j.dump(1) << "\n";
}

// Stable fingerprint of a task collection; recorded in run manifests so a
// report can be tied to the exact corpus it came from.
inline std::uint64_t corpus_hash(const std::vector<TaskRecord>& records) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<const TaskRecord*> sorted;
    for (const TaskRecord& r : records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const TaskRecord* a, const TaskRecord* b) { return a->task_id < b->task_id; });
    for (const TaskRecord* r : sorted) {
        h = fnv1a64(r->task_id, h);
        h = fnv1a64(r->dataset_id, h);
        h = fnv1a64(category_token(r->category), h);
        h = fnv1a64(r->definition, h);
        for (const TaskInstance& ti : r->instances) {
            h = fnv1a64(ti.input, h);
            for (const std::string& o : ti.outputs) h = fnv1a64(o, h);
        }
    }
    return h;
}

}  // namespace scopekit::data
