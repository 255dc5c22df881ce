#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dive {

enum class SubQuestionStatus { pending, answered, retired };
enum class SubQuestionOrigin { breakdown, refinement };

std::string_view to_string(SubQuestionStatus s);
std::string_view to_string(SubQuestionOrigin o);

struct SubQuestion {
    std::string sq_id;
    std::string text;
    int priority = 0;  // higher is more urgent
    SubQuestionStatus status = SubQuestionStatus::pending;
    std::optional<std::string> answer;  // present iff answered
    SubQuestionOrigin origin = SubQuestionOrigin::breakdown;
    int created_round = 0;  // 0 iff origin == breakdown
    std::optional<std::string> tool_used;
    std::optional<std::string> note;  // why an item was retired, when known

    bool is_pending() const { return status == SubQuestionStatus::pending; }
    bool operator==(const SubQuestion&) const = default;
};

struct DraftSubQuestion {
    std::string text;
    int priority = 0;
};

namespace refine {

struct Add {
    std::string text;
    int priority = 0;
};
struct Reprioritize {
    std::string sq_id;
    int priority = 0;
};
struct Retire {
    std::string sq_id;
};

} // namespace refine

using RefinementAction = std::variant<refine::Add, refine::Reprioritize, refine::Retire>;

// Immutable, versioned collection of sub-questions. Every mutation returns a
// new ledger; the receiver is never modified. sq_ids are "sq-<n>" with n
// drawn from a counter carried in the ledger, so ids never repeat even after
// retirement.
class SubQuestionLedger {
public:
    SubQuestionLedger() = default;

    /// Ledger built from the breakdown step: all items pending, round 0. Version 1.
    static SubQuestionLedger from_breakdown(const std::vector<DraftSubQuestion>& drafts);

    const std::vector<SubQuestion>& items() const noexcept { return items_; }
    std::uint64_t version() const noexcept { return version_; }

    const SubQuestion* find(std::string_view sq_id) const;
    std::size_t count(SubQuestionStatus status) const;
    std::size_t pending_count() const { return count(SubQuestionStatus::pending); }
    std::vector<SubQuestion> answered() const;
    std::vector<SubQuestion> pending() const;

    nlohmann::json to_json() const;
    static SubQuestionLedger from_json(const nlohmann::json& j);

    bool operator==(const SubQuestionLedger&) const = default;

private:
    friend SubQuestionLedger ledger_record_answer(const SubQuestionLedger&, std::string_view, std::string,
                                                  std::optional<std::string>);
    friend SubQuestionLedger ledger_apply_refinement(const SubQuestionLedger&, const std::vector<RefinementAction>&,
                                                     int);
    friend SubQuestionLedger ledger_retire_failed(const SubQuestionLedger&, std::string_view, std::string);

    std::string next_id();

    std::vector<SubQuestion> items_;
    std::uint64_t version_ = 0;
    std::uint64_t next_serial_ = 1;
};

/// Highest-priority pending item; ties go to the earliest inserted. Pure.
std::optional<SubQuestion> ledger_select_next(const SubQuestionLedger& ledger);

/// Marks a pending item answered. Throws NotFoundError / IllegalTransitionError,
/// ArgumentError for an empty answer.
SubQuestionLedger ledger_record_answer(const SubQuestionLedger& ledger, std::string_view sq_id, std::string answer,
                                       std::optional<std::string> tool_used);

/// Applies actions in order and bumps the version exactly once, even for an
/// empty action list. All-or-nothing: on error the input ledger is the only
/// result the caller holds.
SubQuestionLedger ledger_apply_refinement(const SubQuestionLedger& ledger, const std::vector<RefinementAction>& actions,
                                          int current_round);

/// Retires a pending item after a tool failure, recording the reason.
SubQuestionLedger ledger_retire_failed(const SubQuestionLedger& ledger, std::string_view sq_id, std::string note);

nlohmann::json to_json(const SubQuestion& sq);

enum class StopReason { sufficient, budget_exhausted, no_pending };
std::string_view to_string(StopReason r);

struct LoopState {
    int round = 0;  // Step-3 invocations so far
    int max_rounds = 25;
    std::optional<StopReason> stop_reason;

    bool terminated() const { return stop_reason.has_value(); }
};

} // namespace dive
