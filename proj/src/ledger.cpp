#include "dive/ledger.hpp"

#include "dive/errors.hpp"

#include <algorithm>

namespace dive {

std::string_view to_string(SubQuestionStatus s) {
    switch (s) {
    case SubQuestionStatus::pending: return "pending";
    case SubQuestionStatus::answered: return "answered";
    case SubQuestionStatus::retired: return "retired";
    }
    return "?";
}

std::string_view to_string(SubQuestionOrigin o) {
    return o == SubQuestionOrigin::breakdown ? "breakdown" : "refinement";
}

std::string_view to_string(StopReason r) {
    switch (r) {
    case StopReason::sufficient: return "sufficient";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::no_pending: return "no_pending";
    }
    return "?";
}

namespace {

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

SubQuestion* find_mut(std::vector<SubQuestion>& items, std::string_view sq_id) {
    auto it = std::find_if(items.begin(), items.end(), [&](const SubQuestion& q) { return q.sq_id == sq_id; });
    return it == items.end() ? nullptr : &*it;
}

SubQuestion& require_pending(std::vector<SubQuestion>& items, std::string_view sq_id, std::string_view op) {
    auto* q = find_mut(items, sq_id);
    if (q == nullptr) {
        throw NotFoundError(std::string(op) + ": unknown sub-question " + std::string(sq_id));
    }
    if (!q->is_pending()) {
        throw IllegalTransitionError(std::string(op) + ": sub-question " + std::string(sq_id) + " is " +
                                     std::string(to_string(q->status)));
    }
    return *q;
}

} // namespace

std::string SubQuestionLedger::next_id() {
    return "sq-" + std::to_string(next_serial_++);
}

SubQuestionLedger SubQuestionLedger::from_breakdown(const std::vector<DraftSubQuestion>& drafts) {
    SubQuestionLedger ledger;
    for (const auto& d : drafts) {
        auto text = trimmed(d.text);
        if (text.empty()) {
            throw ArgumentError("breakdown: empty sub-question text");
        }
        SubQuestion q;
        q.sq_id = ledger.next_id();
        q.text = std::move(text);
        q.priority = d.priority;
        ledger.items_.push_back(std::move(q));
    }
    ledger.version_ = 1;
    return ledger;
}

const SubQuestion* SubQuestionLedger::find(std::string_view sq_id) const {
    auto it = std::find_if(items_.begin(), items_.end(), [&](const SubQuestion& q) { return q.sq_id == sq_id; });
    return it == items_.end() ? nullptr : &*it;
}

std::size_t SubQuestionLedger::count(SubQuestionStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(items_.begin(), items_.end(), [&](const SubQuestion& q) { return q.status == status; }));
}

std::vector<SubQuestion> SubQuestionLedger::answered() const {
    std::vector<SubQuestion> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [](const SubQuestion& q) { return q.status == SubQuestionStatus::answered; });
    return out;
}

std::vector<SubQuestion> SubQuestionLedger::pending() const {
    std::vector<SubQuestion> out;
    std::copy_if(items_.begin(), items_.end(), std::back_inserter(out),
                 [](const SubQuestion& q) { return q.is_pending(); });
    return out;
}

std::optional<SubQuestion> ledger_select_next(const SubQuestionLedger& ledger) {
    const SubQuestion* best = nullptr;
    for (const auto& q : ledger.items()) {
        // strict > keeps the earliest item on ties
        if (q.is_pending() && (best == nullptr || q.priority > best->priority)) {
            best = &q;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return *best;
}

SubQuestionLedger ledger_record_answer(const SubQuestionLedger& ledger, std::string_view sq_id, std::string answer,
                                       std::optional<std::string> tool_used) {
    if (trimmed(answer).empty()) {
        throw ArgumentError("record_answer: empty answer for " + std::string(sq_id));
    }
    SubQuestionLedger next = ledger;
    auto& q = require_pending(next.items_, sq_id, "record_answer");
    q.status = SubQuestionStatus::answered;
    q.answer = std::move(answer);
    q.tool_used = std::move(tool_used);
    ++next.version_;
    return next;
}

SubQuestionLedger ledger_apply_refinement(const SubQuestionLedger& ledger, const std::vector<RefinementAction>& actions,
                                          int current_round) {
    if (current_round < 1) {
        throw ArgumentError("apply_refinement: refinement happens in round >= 1");
    }
    SubQuestionLedger next = ledger;
    for (const auto& action : actions) {
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, refine::Add>) {
                    auto text = trimmed(a.text);
                    if (text.empty()) {
                        throw ArgumentError("apply_refinement: add with empty text");
                    }
                    SubQuestion q;
                    q.sq_id = next.next_id();
                    q.text = std::move(text);
                    q.priority = a.priority;
                    q.origin = SubQuestionOrigin::refinement;
                    q.created_round = current_round;
                    next.items_.push_back(std::move(q));
                } else if constexpr (std::is_same_v<T, refine::Reprioritize>) {
                    require_pending(next.items_, a.sq_id, "reprioritize").priority = a.priority;
                } else {
                    require_pending(next.items_, a.sq_id, "retire").status = SubQuestionStatus::retired;
                }
            },
            action);
    }
    ++next.version_;
    return next;
}

SubQuestionLedger ledger_retire_failed(const SubQuestionLedger& ledger, std::string_view sq_id, std::string note) {
    SubQuestionLedger next = ledger;
    auto& q = require_pending(next.items_, sq_id, "retire");
    q.status = SubQuestionStatus::retired;
    q.note = std::move(note);
    ++next.version_;
    return next;
}

nlohmann::json to_json(const SubQuestion& sq) {
    nlohmann::json j = {
        {"sq_id", sq.sq_id},
        {"text", sq.text},
        {"priority", sq.priority},
        {"status", to_string(sq.status)},
        {"answer", sq.answer ? nlohmann::json(*sq.answer) : nlohmann::json(nullptr)},
        {"origin", to_string(sq.origin)},
        {"created_round", sq.created_round},
        {"tool_used", sq.tool_used ? nlohmann::json(*sq.tool_used) : nlohmann::json(nullptr)},
    };
    if (sq.note) {
        j["note"] = *sq.note;
    }
    return j;
}

nlohmann::json SubQuestionLedger::to_json() const {
    auto items = nlohmann::json::array();
    for (const auto& q : items_) {
        items.push_back(dive::to_json(q));
    }
    return {{"version", version_}, {"next_serial", next_serial_}, {"items", std::move(items)}};
}

SubQuestionLedger SubQuestionLedger::from_json(const nlohmann::json& j) {
    SubQuestionLedger ledger;
    try {
        ledger.version_ = j.at("version").get<std::uint64_t>();
        ledger.next_serial_ = j.value("next_serial", std::uint64_t{1});
        for (const auto& item : j.at("items")) {
            SubQuestion q;
            q.sq_id = item.at("sq_id").get<std::string>();
            q.text = item.at("text").get<std::string>();
            q.priority = item.at("priority").get<int>();
            const auto status = item.at("status").get<std::string>();
            if (status == "pending") {
                q.status = SubQuestionStatus::pending;
            } else if (status == "answered") {
                q.status = SubQuestionStatus::answered;
            } else if (status == "retired") {
                q.status = SubQuestionStatus::retired;
            } else {
                throw ValidationError("ledger: bad status " + status);
            }
            if (!item.at("answer").is_null()) {
                q.answer = item.at("answer").get<std::string>();
            }
            q.origin = item.at("origin").get<std::string>() == "refinement" ? SubQuestionOrigin::refinement
                                                                             : SubQuestionOrigin::breakdown;
            q.created_round = item.at("created_round").get<int>();
            if (!item.at("tool_used").is_null()) {
                q.tool_used = item.at("tool_used").get<std::string>();
            }
            if (item.contains("note")) {
                q.note = item.at("note").get<std::string>();
            }
            ledger.items_.push_back(std::move(q));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("ledger: ") + e.what());
    }
    return ledger;
}

} // namespace dive
