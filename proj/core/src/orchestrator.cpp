#include "symphony/orchestrator.hpp"

#include "symphony/grounding.hpp"
#include "symphony/json_extract.hpp"
#include "symphony/perception.hpp"
#include "symphony/prompts.hpp"
#include "symphony/subtitle_agent.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <limits>
#include <regex>
#include <set>

namespace symphony {

namespace {

using ojson = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return trim(it->get<std::string>());
  return it->dump();
}

ojson ordered(const nlohmann::json& j) { return ojson::parse(j.dump()); }

std::string tool_error_text(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Timeout: return "tool error: timeout";
    case ErrorCode::RateLimited: return "tool error: rate limited";
    case ErrorCode::Connection: return "tool error: connection failed";
    case ErrorCode::HttpStatus: {
      const auto* t = dynamic_cast<const TransportError*>(&e);
      return fmt::format("tool error: http status {}", t ? t->http_status() : 0);
    }
    default: return fmt::format("tool error: {}: {}", to_string(e.code()), e.what());
  }
}

std::optional<std::string> match_label(std::string_view token, const Question& q) {
  for (const auto& o : q.options) {
    if (o.label == token) return o.label;
  }
  return std::nullopt;
}

std::string label_list(const Question& q) {
  std::string out;
  for (const auto& o : q.options) {
    if (!out.empty()) out += ", ";
    out += o.label;
  }
  return out;
}

std::optional<std::string> prefix_label(std::string_view reply, const Question& q) {
  static const std::regex kToken(R"([A-Za-z0-9]+)");
  std::cmatch m;
  if (!std::regex_search(reply.data(), reply.data() + reply.size(), m, kToken)) return std::nullopt;
  const auto token = lower(m.str());
  std::optional<std::string> found;
  for (const auto& o : q.options) {
    if (lower(o.label).starts_with(token)) {
      if (found) return std::nullopt;
      found = o.label;
    }
  }
  return found;
}

ojson question_json(const Question& q) {
  ojson j;
  j["question_id"] = q.question_id;
  j["text"] = q.text;
  auto opts = ojson::array();
  for (const auto& o : q.options) opts.push_back({{"label", o.label}, {"text", o.text}});
  j["options"] = std::move(opts);
  j["category"] = q.category ? ojson(*q.category) : ojson(nullptr);
  return j;
}

ojson answer_json(const Answer& a) {
  ojson j;
  j["choice_label"] = a.choice_label ? ojson(*a.choice_label) : ojson(nullptr);
  j["free_text"] = a.free_text;
  j["confidence_note"] = a.confidence_note ? ojson(*a.confidence_note) : ojson(nullptr);
  j["trajectory_ref"] = a.trajectory_ref;
  return j;
}

ojson tokens_json(const std::map<BackendRole, RoleTokens>& tokens) {
  ojson j = ojson::object();
  for (const auto role : kAllRoles) {
    auto it = tokens.find(role);
    if (it == tokens.end()) continue;
    j[std::string(role_key(role))] = {{"prompt_tokens", it->second.prompt_tokens},
                                      {"completion_tokens", it->second.completion_tokens},
                                      {"calls", it->second.calls}};
  }
  return j;
}

std::map<BackendRole, RoleTokens> token_delta(const std::map<BackendRole, RoleTokens>& now,
                                              const std::map<BackendRole, RoleTokens>& before) {
  std::map<BackendRole, RoleTokens> out;
  for (const auto& [role, t] : now) {
    RoleTokens d = t;
    if (auto it = before.find(role); it != before.end()) {
      d.prompt_tokens -= it->second.prompt_tokens;
      d.completion_tokens -= it->second.completion_tokens;
      d.calls -= it->second.calls;
    }
    if (d.calls > 0) out[role] = d;
  }
  return out;
}

// Accumulates the episode log as the episode runs.
struct EpisodeLog {
  ojson question;
  ojson video;
  ojson budgets;
  ojson proposals = ojson::array();
  ojson verdicts = ojson::array();
  ojson faults = ojson::array();

  ojson build(const Trajectory& t, const std::string& status, int attempts_used,
              const std::optional<Answer>& answer, const std::map<BackendRole, RoleTokens>& tokens,
              const std::optional<std::string>& error) const {
    ojson j;
    j["schema_version"] = kEpisodeLogSchemaVersion;
    j["status"] = status;
    j["question"] = question;
    j["video"] = video;
    j["budgets"] = budgets;
    auto steps = ojson::array();
    std::size_t index = 0;
    for (const auto& s : t.steps()) {
      ojson step;
      step["index"] = ++index;
      step["attempt"] = s.attempt;
      step["agent"] = agent_name(s.action.kind);
      step["reason"] = s.action.reason;
      step["instruct"] = s.action.instruct;
      step["observation"] = s.observation.text;
      step["truncated"] = s.observation.truncated;
      step["artifacts"] = s.observation.artifacts.is_null() ? ojson(nullptr)
                                                            : ordered(s.observation.artifacts);
      steps.push_back(std::move(step));
    }
    j["steps"] = std::move(steps);
    auto critiques = ojson::array();
    for (const auto& c : t.critiques()) {
      critiques.push_back(
          {{"attempt", c.attempt_index}, {"after_step", c.after_step}, {"comment", c.comment}});
    }
    j["critiques"] = std::move(critiques);
    j["proposals"] = proposals;
    j["verdicts"] = verdicts;
    j["faults"] = faults;
    j["attempts_used"] = attempts_used;
    j["steps_used"] = t.steps().size();
    j["answer"] = answer ? answer_json(*answer) : ojson(nullptr);
    j["tokens"] = tokens_json(tokens);
    j["error"] = error ? ojson(*error) : ojson(nullptr);
    return j;
  }
};

}  // namespace

std::string render_history(const Trajectory& trajectory) {
  std::string out;
  const auto steps = trajectory.steps();
  const auto critiques = trajectory.critiques();
  std::size_t next_critique = 0;
  auto emit_critiques_at = [&](std::size_t count) {
    while (next_critique < critiques.size() && critiques[next_critique].after_step <= count) {
      const auto& c = critiques[next_critique++];
      if (!out.empty()) out += "\n\n";
      out += fmt::format("Reflection feedback (attempt {}): {}", c.attempt_index, c.comment);
    }
  };
  emit_critiques_at(0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (!out.empty()) out += "\n\n";
    if (s.action.kind == AgentKind::Terminate) {
      out += fmt::format("Step {} - finish\nProposed answer: {}", i + 1, s.observation.text);
    } else {
      out += fmt::format("Step {} - {}\nInstruct: {}\nObservation: {}", i + 1,
                         agent_name(s.action.kind), s.action.instruct, s.observation.text);
    }
    emit_critiques_at(i + 1);
  }
  emit_critiques_at(std::numeric_limits<std::size_t>::max());
  return out;
}

ReflectionVerdict parse_verdict(std::string_view reply) {
  nlohmann::json j;
  try {
    j = extract_json(reply);
  } catch (const Error&) {
    return {false, std::string(kUnparseableVerdict)};
  }
  auto it = j.find("credible");
  if (it == j.end()) return {false, std::string(kUnparseableVerdict)};
  std::optional<bool> credible;
  if (it->is_boolean()) {
    credible = it->get<bool>();
  } else if (it->is_string()) {
    const auto s = lower(trim(it->get<std::string>()));
    if (s == "true" || s == "yes") credible = true;
    if (s == "false" || s == "no") credible = false;
  }
  if (!credible) return {false, std::string(kUnparseableVerdict)};
  if (*credible) return {true, std::nullopt};
  auto comment = string_field(j, "comment");
  if (comment.empty() || lower(comment) == "null") {
    comment = "The answer was judged not credible; no explanation was given.";
  }
  return {false, std::move(comment)};
}

std::optional<std::string> extract_choice_label(std::string_view reply, const Question& question) {
  if (!question.is_multiple_choice()) return std::nullopt;
  const std::string text(reply);

  std::string bare;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != '[' &&
        c != ']' && c != '.') {
      bare += c;
    }
  }
  if (auto l = match_label(bare, question)) return l;

  static const std::regex kStated(
      R"((?:answer|option|choice)\s*(?:is|:)?\s*[:\-]?\s*[\(\[]?([A-Za-z0-9]+))",
      std::regex::icase);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kStated);
       it != std::sregex_iterator(); ++it) {
    if (auto l = match_label((*it)[1].str(), question)) return l;
  }

  static const std::regex kBracketed(R"([\(\[]([A-Za-z0-9]{1,3})[\)\]])");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kBracketed);
       it != std::sregex_iterator(); ++it) {
    if (auto l = match_label((*it)[1].str(), question)) return l;
  }

  static const std::regex kToken(R"([A-Za-z0-9]+)");
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kToken);
       it != std::sregex_iterator(); ++it) {
    const auto tok = it->str();
    if (std::any_of(tok.begin(), tok.end(), [](unsigned char c) { return std::islower(c); })) {
      continue;
    }
    if (auto l = match_label(tok, question)) seen.insert(*l);
  }
  if (seen.size() == 1) return *seen.begin();
  return std::nullopt;
}

Orchestrator::Orchestrator(ModelGateway& gateway, Budgets budgets)
    : gateway_(gateway), budgets_(budgets) {
  budgets_.validate();
}

PlanStep Orchestrator::plan_step(const EpisodeState& state, int max_calls) {
  if (max_calls < 1) throw Error(ErrorCode::InvalidArgument, "plan_step needs at least one call");
  std::vector<ChatMessage> messages{ChatMessage::user(render_prompt(
      PromptId::Planner,
      {{"question", state.question.render()},
       {"duration", state.video ? format_timecode(state.video->duration()) : std::string("unknown")},
       {"history_str", render_history(state.trajectory)}}))};
  PlanStep out;
  std::optional<std::string> last_problem;

  while (out.model_calls < max_calls) {
    const auto reply = gateway_.chat(BackendRole::Planner, "planner", messages);
    ++out.model_calls;
    std::string problem;
    try {
      const auto j = extract_json(reply);
      const auto name = string_field(j, "agent");
      const auto kind = parse_agent_name(name);
      out.action.reason = string_field(j, "reason");
      out.action.instruct = string_field(j, "instruct");
      if (!kind) {
        problem = fmt::format(
            "The agent name \"{}\" is not valid. Use exactly one of \"Grounding Agent\", "
            "\"Visual Perception Agent\", \"Subtitle Agent\" or \"finish\".",
            name);
        last_problem = fmt::format("unknown agent \"{}\"", name);
      } else if (*kind != AgentKind::Terminate && out.action.instruct.empty()) {
        problem = "The \"instruct\" field must not be empty. Give the agent a specific instruction.";
        last_problem = fmt::format("empty instruct for {}", agent_name(*kind));
      } else {
        out.action.kind = *kind;
        return out;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoJsonFound) throw;
      if (out.model_calls >= max_calls) {
        throw Error(ErrorCode::PlanningParseFailure,
                    fmt::format("planner reply held no JSON action: {}", e.what()));
      }
      problem = "Your reply did not contain a JSON object. Call Agents in json format with the "
                "keys \"reason\", \"agent\" and \"instruct\".";
      last_problem.reset();
    }
    messages.push_back(ChatMessage::assistant(reply));
    messages.push_back(ChatMessage::user(problem));
  }

  spdlog::warn("planner fault: {}; treating as finish", last_problem.value_or("invalid action"));
  out.action.kind = AgentKind::Terminate;
  out.action.instruct.clear();
  out.fault = last_problem.value_or("invalid action");
  return out;
}

Observation Orchestrator::dispatch_action(const AgentAction& action, EpisodeState& state,
                                          int attempt) {
  if (action.kind == AgentKind::Terminate) {
    throw Error(ErrorCode::InvalidArgument, "dispatch_action cannot run finish");
  }
  if (!state.video) throw Error(ErrorCode::InvalidArgument, "episode has no video");
  const auto budget = static_cast<std::size_t>(budgets_.observation_chars);
  Observation obs;
  try {
    switch (action.kind) {
      case AgentKind::Grounding: {
        GroundingAgent agent(gateway_, budgets_);
        const auto result = agent.run(action.instruct, state.question, *state.video);
        obs = make_observation(AgentKind::Grounding, result.report, budget, to_json(result));
        break;
      }
      case AgentKind::VisualPerception: {
        PerceptionAgent agent(gateway_, budgets_);
        obs = agent.run(action.instruct, *state.video);
        break;
      }
      case AgentKind::Subtitle: {
        if (!state.subtitles || state.subtitles->empty()) {
          obs = make_observation(AgentKind::Subtitle, "No subtitles are available for this video.",
                                 budget);
          break;
        }
        SubtitleAgentOptions opt;
        opt.relevant_info_chars = budget;
        opt.video_duration = state.video->duration();
        const auto analysis = analyze_subtitles(gateway_, state.question, *state.subtitles, opt);
        obs = make_observation(AgentKind::Subtitle, analysis.render(), budget, to_json(analysis));
        break;
      }
      case AgentKind::Terminate: break;
    }
  } catch (const Error& e) {
    spdlog::warn("{} failed: {}", agent_name(action.kind), e.what());
    obs = make_observation(action.kind, tool_error_text(e), budget);
  }
  state.trajectory.append({attempt, action, obs});
  return obs;
}

ReflectionVerdict Orchestrator::reflect(const EpisodeState& state,
                                        const std::string& proposed_answer) {
  const auto prompt = render_prompt(PromptId::Reflector,
                                    {{"history", render_history(state.trajectory)},
                                     {"question", state.question.render()},
                                     {"proposed_answer", proposed_answer}});
  const auto reply =
      gateway_.chat(BackendRole::Reflector, "reflector", {ChatMessage::user(prompt)});
  return parse_verdict(reply);
}

Answer Orchestrator::finalize_answer(const EpisodeState& state) {
  const auto& q = state.question;
  const std::string format =
      q.is_multiple_choice()
          ? fmt::format("Reply with the label of the single best option ({}) in the form "
                        "\"Answer: (X)\", followed by a one-sentence justification.",
                        label_list(q))
          : std::string("Reply with a concise, direct answer to the question.");
  std::vector<ChatMessage> messages{ChatMessage::user(render_prompt(
      PromptId::FinalAnswer,
      {{"question", q.render()},
       {"duration", state.video ? format_timecode(state.video->duration()) : std::string("unknown")},
       {"history_str", render_history(state.trajectory)},
       {"answer_format", format}}))};

  auto reply = gateway_.chat(BackendRole::Planner, "answer", messages);
  Answer answer;
  answer.trajectory_ref = q.question_id;
  if (!q.is_multiple_choice()) {
    answer.free_text = trim(reply);
    return answer;
  }
  auto label = extract_choice_label(reply, q);
  if (!label) {
    messages.push_back(ChatMessage::assistant(reply));
    messages.push_back(ChatMessage::user(fmt::format(
        "Your reply did not name one of the options. Reply with exactly one of these labels: {}.",
        label_list(q))));
    reply = gateway_.chat(BackendRole::Planner, "answer", messages);
    label = extract_choice_label(reply, q);
    if (!label) label = prefix_label(reply, q);
  }
  if (!label) {
    throw Error(ErrorCode::AnswerExtractionFailure,
                fmt::format("final answer names none of the options {}: {}", label_list(q),
                            trim(reply).substr(0, 200)));
  }
  answer.choice_label = std::move(label);
  answer.free_text = trim(reply);
  return answer;
}

EpisodeOutcome Orchestrator::run_episode(const Question& question, const FrameManifest& video,
                                         const SubtitleTrack* subtitles) {
  question.validate();
  const auto tokens_before = gateway_.token_totals();
  EpisodeState state{question, {}, &video, subtitles};

  EpisodeLog log;
  log.question = question_json(question);
  log.video = {{"video_id", video.video_id()},
               {"duration", format_timecode(video.duration())},
               {"duration_ms", video.duration().millis()}};
  nlohmann::json b;
  to_json(b, budgets_);
  log.budgets = ordered(b);

  EpisodeOutcome outcome;
  auto abort = [&](const Error& e) -> EpisodeAbortedError {
    const auto tokens = token_delta(gateway_.token_totals(), tokens_before);
    auto partial = log.build(state.trajectory, "aborted", outcome.attempts_used, std::nullopt,
                             tokens, fmt::format("{}: {}", to_string(e.code()), e.what()));
    return EpisodeAbortedError(fmt::format("episode aborted: {}", e.what()), std::move(partial));
  };

  try {
    for (int attempt = 1; attempt <= budgets_.reflection_rounds; ++attempt) {
      outcome.attempts_used = attempt;
      int calls = 0;
      std::optional<std::string> proposed;
      while (calls < budgets_.inner_rounds) {
        PlanStep step;
        try {
          step = plan_step(state, std::min(2, budgets_.inner_rounds - calls));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::PlanningParseFailure) throw;
          calls += std::min(2, budgets_.inner_rounds - calls);
          log.faults.push_back({{"attempt", attempt}, {"fault", e.what()}});
          continue;
        }
        calls += step.model_calls;
        if (step.fault) log.faults.push_back({{"attempt", attempt}, {"fault", *step.fault}});
        if (step.action.kind == AgentKind::Terminate) {
          proposed = step.action.instruct.empty() ? std::string(kNoProposedAnswer)
                                                  : step.action.instruct;
          Observation note;
          note.source = AgentKind::Terminate;
          note.text = *proposed;
          state.trajectory.append({attempt, step.action, std::move(note)});
          break;
        }
        dispatch_action(step.action, state, attempt);
      }
      const auto proposal = proposed.value_or(std::string(kNoProposedAnswer));
      log.proposals.push_back({{"attempt", attempt}, {"answer", proposal}});

      auto verdict = reflect(state, proposal);
      log.verdicts.push_back({{"attempt", attempt},
                              {"credible", verdict.credible},
                              {"comment", verdict.comment ? ojson(*verdict.comment) : ojson(nullptr)}});
      outcome.verdicts.push_back(verdict);
      if (verdict.credible) break;
      state.trajectory.add_critique(
          {verdict.comment.value_or(std::string(kUnparseableVerdict)), attempt,
           state.trajectory.steps().size()});
    }

    outcome.answer = finalize_answer(state);
  } catch (const EpisodeAbortedError&) {
    throw;
  } catch (const Error& e) {
    throw abort(e);
  }

  if (outcome.verdicts.empty() || !outcome.verdicts.back().credible) {
    outcome.answer.confidence_note =
        fmt::format("low confidence: no credible verdict after {} reflection attempts",
                    outcome.attempts_used);
  }
  outcome.steps_used = static_cast<int>(state.trajectory.steps().size());
  outcome.tokens = token_delta(gateway_.token_totals(), tokens_before);
  outcome.log = log.build(state.trajectory, "completed", outcome.attempts_used, outcome.answer,
                          outcome.tokens, std::nullopt);
  return outcome;
}

}  // namespace symphony
