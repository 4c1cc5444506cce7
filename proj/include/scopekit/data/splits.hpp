#pragma once

// Train/validation split construction. Instances for each side of the plan
// are divided as evenly as possible across that side's tasks (remainder
// round-robin in lexicographic task_id order), drawn uniformly without
// replacement per task under a task-derived seed, and at least val_fraction
// of every task's draw is reserved for validation.

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "scopekit/core.hpp"
#include "scopekit/data/plan.hpp"
#include "scopekit/data/task.hpp"

namespace scopekit::data {

struct SplitResult {
    std::vector<PromptInstance> train;
    std::vector<PromptInstance> val;
};

namespace detail {

// Even division of n across tasks with per-task capacity limits. Remainders
// and overflow from saturated tasks are redistributed round-robin in the
// given (lexicographic) order.
inline std::vector<int> even_quotas(int n, const std::vector<int>& capacity) {
    std::vector<int> quota(capacity.size(), 0);
    int remaining = n;
    while (remaining > 0) {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < capacity.size(); ++i)
            if (quota[i] < capacity[i]) open.push_back(i);
        if (open.empty())
            throw DataError("not enough instances: requested " + std::to_string(n) + ", pool holds " +
                            std::to_string(std::accumulate(capacity.begin(), capacity.end(), 0)));
        int base = remaining / static_cast<int>(open.size());
        int rem = remaining % static_cast<int>(open.size());
        bool progressed = false;
        for (std::size_t k = 0; k < open.size(); ++k) {
            int want = base + (static_cast<int>(k) < rem ? 1 : 0);
            int give = std::min(want, capacity[open[k]] - quota[open[k]]);
            quota[open[k]] += give;
            remaining -= give;
            progressed = progressed || give > 0;
        }
        if (!progressed) break;
    }
    return quota;
}

inline std::vector<const TaskRecord*> tasks_of(const std::vector<TaskRecord>& records, Category c) {
    std::vector<const TaskRecord*> out;
    for (const TaskRecord& r : records)
        if (r.category == c) out.push_back(&r);
    std::sort(out.begin(), out.end(),
              [](const TaskRecord* a, const TaskRecord* b) { return a->task_id < b->task_id; });
    return out;
}

struct DrawResult {
    std::vector<PromptInstance> train, val;
};

// Draws `quota` instances from one task: shuffle indices under the task seed,
// take the head, put the trailing ceil(val_fraction * quota) into validation.
inline void draw_task(const TaskRecord& task, int quota, Role role, double val_fraction,
                      std::uint64_t seed, const std::string& system_prompt, DrawResult& out) {
    if (quota <= 0) return;
    std::vector<int> idx(task.instances.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, "draw:" + task.task_id));
    rng.shuffle(idx);
    int n_val = static_cast<int>(std::ceil(val_fraction * quota));
    for (int k = 0; k < quota; ++k) {
        const TaskInstance& ti = task.instances[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        PromptInstance pi;
        pi.task_id = task.task_id;
        pi.dataset_id = task.dataset_id;
        pi.category = task.category;
        pi.role = role;
        pi.split = k < quota - n_val ? Split::train : Split::val;
        pi.system_prompt = system_prompt;
        pi.input = ti.input;
        pi.instruction = make_instruction(task.definition, ti.input);
        pi.gold = ti.outputs.front();
        pi.refs = ti.outputs;
        (pi.split == Split::train ? out.train : out.val).push_back(std::move(pi));
    }
}

inline void draw_side(const std::vector<const TaskRecord*>& tasks, int n, Role role, double val_fraction,
                      std::uint64_t seed, const std::string& system_prompt, DrawResult& out) {
    if (tasks.empty()) throw ConfigError("split side has no tasks");
    std::vector<int> capacity;
    for (const TaskRecord* t : tasks) capacity.push_back(static_cast<int>(t->instances.size()));
    std::vector<int> quota = even_quotas(n, capacity);
    for (std::size_t i = 0; i < tasks.size(); ++i)
        draw_task(*tasks[i], quota[i], role, val_fraction, seed, system_prompt, out);
}

}  // namespace detail

// Fine-grained accept/reject pools within one category: FA is the held task;
// FR is every other task of the category except those sharing the held
// task's source dataset.
struct FinegrainedPools {
    const TaskRecord* fa = nullptr;
    std::vector<const TaskRecord*> fr;
};

inline FinegrainedPools build_finegrained_splits(const std::vector<TaskRecord>& records, Category category,
                                                 const std::string& held_task_id) {
    FinegrainedPools pools;
    auto tasks = detail::tasks_of(records, category);
    for (const TaskRecord* t : tasks)
        if (t->task_id == held_task_id) pools.fa = t;
    if (!pools.fa)
        throw ConfigError("finegrained: task " + held_task_id + " not found in category " +
                          category_token(category));
    for (const TaskRecord* t : tasks)
        if (t->task_id != held_task_id && t->dataset_id != pools.fa->dataset_id) pools.fr.push_back(t);
    if (pools.fr.empty())
        throw ConfigError("finegrained: category " + std::string(category_token(category)) +
                          " has no task outside dataset " + pools.fa->dataset_id);
    return pools;
}

inline SplitResult build_splits(const std::vector<TaskRecord>& records, const ScopePlan& plan) {
    plan.validate();
    std::string system_prompt = plan.system_prompt();

    for (Category c : plan.accept)
        if (detail::tasks_of(records, c).empty())
            throw ConfigError(std::string("plan category ") + category_token(c) + " absent from records");
    for (Category c : plan.reject)
        if (detail::tasks_of(records, c).empty())
            throw ConfigError(std::string("plan category ") + category_token(c) + " absent from records");

    std::vector<const TaskRecord*> accept_tasks, reject_tasks;
    if (plan.finegrained) {
        FinegrainedPools pools =
            build_finegrained_splits(records, plan.finegrained->category, plan.finegrained->held_task_id);
        accept_tasks.push_back(pools.fa);
        for (Category c : plan.accept)
            if (c != plan.finegrained->category)
                for (const TaskRecord* t : detail::tasks_of(records, c)) accept_tasks.push_back(t);
        if (plan.finegrained->include_fr_in_reject)
            for (const TaskRecord* t : pools.fr) reject_tasks.push_back(t);
    } else {
        for (Category c : plan.accept)
            for (const TaskRecord* t : detail::tasks_of(records, c)) accept_tasks.push_back(t);
    }
    for (Category c : plan.reject)
        for (const TaskRecord* t : detail::tasks_of(records, c)) reject_tasks.push_back(t);

    std::sort(accept_tasks.begin(), accept_tasks.end(),
              [](const TaskRecord* a, const TaskRecord* b) { return a->task_id < b->task_id; });
    std::sort(reject_tasks.begin(), reject_tasks.end(),
              [](const TaskRecord* a, const TaskRecord* b) { return a->task_id < b->task_id; });

    detail::DrawResult out;
    detail::draw_side(accept_tasks, plan.n_accept, Role::accept, plan.val_fraction, plan.seed, system_prompt,
                      out);
    if (plan.n_reject > 0) {
        if (reject_tasks.empty()) throw ConfigError("plan requests reject instances but lists no reject pool");
        detail::draw_side(reject_tasks, plan.n_reject, Role::id_reject, plan.val_fraction, plan.seed,
                          system_prompt, out);
    }
    return {std::move(out.train), std::move(out.val)};
}

// One evaluation set per Table-1 category (plus FA/FR sets under a
// fine-grained plan). Plan categories draw from the validation split;
// everything else samples directly from the corpus.
struct EvalSet {
    std::string label;  // category token, or "<cat>-FA" / "<cat>-FR"
    Category category = Category::SA;
    Role role = Role::ood_reject;
    std::vector<PromptInstance> instances;
};

inline std::vector<EvalSet> build_eval_sets(const std::vector<TaskRecord>& records, const ScopePlan& plan,
                                            const SplitResult& splits, int n_per_category) {
    std::string system_prompt = plan.system_prompt();
    std::vector<EvalSet> sets;

    std::map<std::string, std::vector<const PromptInstance*>> val_by_label;
    auto label_of = [&](const PromptInstance& pi) -> std::string {
        if (plan.finegrained && pi.category == plan.finegrained->category) {
            return std::string(category_token(pi.category)) +
                   (pi.task_id == plan.finegrained->held_task_id ? "-FA" : "-FR");
        }
        return category_token(pi.category);
    };
    for (const PromptInstance& pi : splits.val) val_by_label[label_of(pi)].push_back(&pi);

    auto take_val = [&](const std::string& label, Category cat, Role role) {
        EvalSet set;
        set.label = label;
        set.category = cat;
        set.role = role;
        auto it = val_by_label.find(label);
        if (it == val_by_label.end() || it->second.empty())
            throw ConfigError("no validation instances available for eval set " + label);
        int n = std::min<int>(n_per_category, static_cast<int>(it->second.size()));
        for (int i = 0; i < n; ++i) set.instances.push_back(*it->second[static_cast<std::size_t>(i)]);
        sets.push_back(std::move(set));
    };

    auto sample_corpus = [&](const std::string& label, Category cat, Role role,
                             const std::vector<const TaskRecord*>& tasks) {
        EvalSet set;
        set.label = label;
        set.category = cat;
        set.role = role;
        std::vector<int> capacity;
        for (const TaskRecord* t : tasks) capacity.push_back(static_cast<int>(t->instances.size()));
        int total = std::min<int>(n_per_category, std::accumulate(capacity.begin(), capacity.end(), 0));
        std::vector<int> quota = detail::even_quotas(total, capacity);
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            const TaskRecord& task = *tasks[ti];
            std::vector<int> idx(task.instances.size());
            std::iota(idx.begin(), idx.end(), 0);
            Rng rng(mix_seed(plan.seed, "eval:" + task.task_id));
            rng.shuffle(idx);
            for (int k = 0; k < quota[ti]; ++k) {
                const TaskInstance& inst = task.instances[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
                PromptInstance pi;
                pi.task_id = task.task_id;
                pi.dataset_id = task.dataset_id;
                pi.category = task.category;
                pi.role = role;
                pi.split = Split::val;
                pi.system_prompt = system_prompt;
                pi.input = inst.input;
                pi.instruction = make_instruction(task.definition, inst.input);
                pi.gold = inst.outputs.front();
                pi.refs = inst.outputs;
                set.instances.push_back(std::move(pi));
            }
        }
        sets.push_back(std::move(set));
    };

    for (Category c : kAllCategories) {
        std::string token = category_token(c);
        bool is_fg_cat = plan.finegrained && plan.finegrained->category == c;
        if (is_fg_cat) {
            take_val(token + "-FA", c, Role::accept);
            if (plan.finegrained->include_fr_in_reject) {
                take_val(token + "-FR", c, Role::id_reject);
            } else {
                FinegrainedPools pools = build_finegrained_splits(records, c, plan.finegrained->held_task_id);
                sample_corpus(token + "-FR", c, Role::ood_reject, pools.fr);
            }
        } else if (plan.in_accept(c)) {
            take_val(token, c, Role::accept);
        } else if (plan.in_reject(c)) {
            take_val(token, c, Role::id_reject);
        } else {
            auto tasks = detail::tasks_of(records, c);
            if (tasks.empty()) continue;  // category not present in this corpus
            sample_corpus(token, c, Role::ood_reject, tasks);
        }
    }
    return sets;
}

}  // namespace scopekit::data
