#include "actgen/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <httplib.h>

#include "actgen/agent.hpp"
#include "actgen/errors.hpp"
#include "actgen/rng.hpp"

namespace actgen {

std::string_view setup_name(Setup s) { return s == Setup::Natural ? "natural" : "synthetic"; }

std::optional<Setup> parse_setup(std::string_view s) {
  if (s == "natural") return Setup::Natural;
  if (s == "synthetic") return Setup::Synthetic;
  return std::nullopt;
}

nlohmann::ordered_json to_json(const AgentTurn& t) {
  nlohmann::ordered_json j;
  j["turn_index"] = t.turn_index;
  j["speaker"] = std::string(speaker_name(t.speaker));
  j["text"] = t.text;
  j["act"] = std::string(act_code(t.act));
  j["act_name"] = std::string(kActNames[static_cast<std::size_t>(act_index(t.act))]);
  return j;
}

namespace {

nlohmann::ordered_json options_json(const SessionOptions& o) {
  nlohmann::ordered_json j;
  j["temperature"] = o.decoding.temperature;
  j["top_k"] = o.decoding.top_k;
  j["top_p"] = o.decoding.top_p;
  j["max_new_tokens"] = o.decoding.max_new_tokens;
  j["seed"] = o.decoding.seed;
  j["min_new_tokens"] = o.decoding.min_new_tokens;
  j["k"] = o.k;
  return j;
}

SessionOptions options_from_json(const nlohmann::json& j) {
  SessionOptions o;
  if (!j.is_object()) throw ServiceError(400, "invalid_request", "options must be an object");
  try {
    o.decoding.temperature = j.value("temperature", o.decoding.temperature);
    o.decoding.top_k = j.value("top_k", o.decoding.top_k);
    o.decoding.top_p = j.value("top_p", o.decoding.top_p);
    o.decoding.max_new_tokens = j.value("max_new_tokens", o.decoding.max_new_tokens);
    o.decoding.seed = j.value("seed", o.decoding.seed);
    o.decoding.min_new_tokens = j.value("min_new_tokens", o.decoding.min_new_tokens);
    o.k = j.value("k", o.k);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, "invalid_request", std::string("bad option: ") + e.what());
  }
  if (j.value("greedy", false)) o.decoding.temperature = 0.0;
  return o;
}

AgentTurn as_agent_turn(const Utterance& u) { return {u.turn_index, u.speaker, u.text, u.act}; }

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const ServiceModel> model, std::filesystem::path store_dir)
    : model_(std::move(model)), store_dir_(std::move(store_dir)) {
  if (!store_dir_.empty()) {
    std::filesystem::create_directories(store_dir_);
    restore();
  }
}

std::string SessionManager::create(Setup setup, const std::vector<SeedTurn>& seed, const SessionOptions& options) {
  if (seed.empty()) throw ServiceError(400, "empty_seed", "seed_context must contain at least one turn");
  if (options.k == 0) throw ServiceError(400, "invalid_request", "k must be positive");
  if (options.decoding.min_new_tokens < 1 || options.decoding.min_new_tokens > options.decoding.max_new_tokens) {
    throw ServiceError(400, "invalid_request", "min_new_tokens must lie in [1, max_new_tokens]");
  }
  if (options.decoding.max_new_tokens <= 0 ||
      static_cast<std::size_t>(options.decoding.max_new_tokens) + 6 > static_cast<std::size_t>(model_->policy.config().max_seq_len)) {
    throw ServiceError(400, "invalid_request", "max_new_tokens out of range for the model");
  }
  for (const auto& t : seed) {
    if (tokenize(t.text).empty()) throw ServiceError(400, "invalid_request", "seed turns must have text");
  }

  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "session-%06llu", static_cast<unsigned long long>(next_id_++));
    s->id = buf;
  }
  s->setup = setup;
  s->options = options;
  s->seed_size = seed.size();
  s->dialogue.id = s->id;
  persist_header(*s);
  for (const auto& t : seed) {
    Utterance u{s->id, static_cast<int>(s->dialogue.size()), t.speaker, t.text, DialogueAct::ID};
    if (t.act) {
      u.act = *t.act;
    } else {
      const Context ctx = recent_context(s->dialogue, options.k);
      u.act = predict_next_act(model_->policy, model_->space, ctx, t.speaker,
                               static_cast<std::size_t>(model_->policy.config().max_seq_len) - 2)
                  .act;
    }
    append(*s, std::move(u));
  }
  std::lock_guard lock(mu_);
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown_session", "no session '" + id + "'");
  return it->second;
}

Utterance SessionManager::agent_turn(Session& s, Speaker speaker) {
  const std::size_t t = s.dialogue.size();
  const Context ctx = recent_context(s.dialogue, s.options.k);
  Rng rng(mix_seed(s.options.decoding.seed, t));
  const AgentReply r = respond(model_->policy, model_->space, ctx, speaker, s.options.decoding, rng);
  return {s.id, static_cast<int>(t), speaker, r.text, r.act};
}

AgentTurn SessionManager::post_utterance(const std::string& id, const std::string& client_text) {
  const auto s = find(id);
  if (s->setup != Setup::Natural) throw ServiceError(409, "wrong_setup", "utterances are accepted by natural sessions only");
  if (tokenize(client_text).empty()) throw ServiceError(400, "invalid_request", "text must contain words");
  std::unique_lock turn(s->turn, std::try_to_lock);
  if (!turn.owns_lock()) throw ServiceError(409, "out_of_turn", "the agent has not replied to the previous utterance");

  const Context ctx = recent_context(s->dialogue, s->options.k);
  const DialogueAct client_act =
      predict_next_act(model_->policy, model_->space, ctx, Speaker::Client,
                       static_cast<std::size_t>(model_->policy.config().max_seq_len) - 2)
          .act;
  append(*s, {s->id, static_cast<int>(s->dialogue.size()), Speaker::Client, client_text, client_act});
  Utterance reply = agent_turn(*s, Speaker::Therapist);
  append(*s, reply);
  return as_agent_turn(reply);
}

AgentTurn SessionManager::step(const std::string& id) {
  const auto s = find(id);
  if (s->setup != Setup::Synthetic) throw ServiceError(409, "wrong_setup", "step is available for synthetic sessions only");
  std::unique_lock turn(s->turn, std::try_to_lock);
  if (!turn.owns_lock()) throw ServiceError(409, "out_of_turn", "a turn is already being generated");
  const Speaker next = other(s->dialogue.turns.back().speaker);
  Utterance u = agent_turn(*s, next);
  append(*s, u);
  return as_agent_turn(u);
}

Dialogue SessionManager::transcript(const std::string& id) const {
  const auto s = find(id);
  std::lock_guard turn(s->turn);
  return s->dialogue;
}

Setup SessionManager::setup(const std::string& id) const { return find(id)->setup; }

std::vector<std::string> SessionManager::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

void SessionManager::append(Session& s, Utterance u) {
  if (!store_dir_.empty()) {
    std::ofstream out(store_dir_ / (s.id + ".jsonl"), std::ios::binary | std::ios::app);
    out << serialize_utterance(u) << '\n';
    if (!out) throw DataError("cannot append to transcript of " + s.id);
  }
  s.dialogue.turns.push_back(std::move(u));
}

void SessionManager::persist_header(const Session& s) const {
  if (store_dir_.empty()) return;
  nlohmann::ordered_json j;
  j["session_id"] = s.id;
  j["setup"] = std::string(setup_name(s.setup));
  j["options"] = options_json(s.options);
  j["seed_size"] = s.seed_size;
  std::ofstream out(store_dir_ / (s.id + ".session.json"), std::ios::binary | std::ios::trunc);
  out << j.dump() << '\n';
  if (!out) throw DataError("cannot write session header for " + s.id);
}

void SessionManager::restore() {
  std::vector<std::filesystem::path> headers;
  for (const auto& e : std::filesystem::directory_iterator(store_dir_)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 13 && name.ends_with(".session.json")) headers.push_back(e.path());
  }
  std::sort(headers.begin(), headers.end());
  for (const auto& h : headers) {
    std::ifstream in(h, std::ios::binary);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed session header " + h.string() + ": " + e.what());
    }
    auto s = std::make_shared<Session>();
    s->id = j.at("session_id").get<std::string>();
    const auto setup = parse_setup(j.at("setup").get<std::string>());
    if (!setup) throw DataError("unknown setup in " + h.string());
    s->setup = *setup;
    s->options = options_from_json(j.at("options"));
    s->seed_size = j.at("seed_size").get<std::size_t>();
    s->dialogue.id = s->id;
    const auto transcript = store_dir_ / (s->id + ".jsonl");
    if (std::filesystem::exists(transcript)) {
      Corpus c = load_corpus(transcript);
      for (auto& d : c.dialogues) {
        for (auto& u : d.turns) s->dialogue.turns.push_back(std::move(u));
      }
    }
    unsigned long long n = 0;
    if (std::sscanf(s->id.c_str(), "session-%llu", &n) == 1) next_id_ = std::max<std::uint64_t>(next_id_, n + 1);
    sessions_[s->id] = s;
  }
}

nlohmann::ordered_json transcript_json(const Dialogue& d) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = d.id;
  j["turns"] = nlohmann::ordered_json::array();
  for (const auto& u : d.turns) j["turns"].push_back(nlohmann::ordered_json::parse(serialize_utterance(u)));
  return j;
}

// ---- HTTP ---------------------------------------------------------------------------

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error_code", code}, {"message", message}});
}

nlohmann::json parse_body(const httplib::Request& req, bool allow_empty) {
  if (req.body.empty()) {
    if (allow_empty) return nlohmann::json::object();
    throw ServiceError(400, "invalid_request", "request body is required");
  }
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ServiceError(400, "invalid_request", "request body must be an object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ServiceError(400, "invalid_request", std::string("malformed JSON: ") + e.what());
  }
}

std::vector<SeedTurn> seed_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ServiceError(400, "invalid_request", "seed_context must be an array");
  std::vector<SeedTurn> seed;
  for (const auto& t : j) {
    if (!t.is_object() || !t.contains("speaker") || !t.contains("text") || !t["speaker"].is_string() ||
        !t["text"].is_string()) {
      throw ServiceError(400, "invalid_request", "each seed turn needs string speaker and text");
    }
    SeedTurn s;
    const auto spk = parse_speaker(t["speaker"].get<std::string>());
    if (!spk) throw ServiceError(400, "invalid_request", "unknown speaker '" + t["speaker"].get<std::string>() + "'");
    s.speaker = *spk;
    s.text = t["text"].get<std::string>();
    if (t.contains("act") && !t["act"].is_null()) {
      const auto act = t["act"].is_string() ? parse_act(t["act"].get<std::string>()) : std::nullopt;
      if (!act) throw ServiceError(400, "invalid_request", "unknown act code in seed turn");
      s.act = *act;
    }
    seed.push_back(std::move(s));
  }
  return seed;
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, SessionManager& sessions) {
  server.Get("/health", guarded([&sessions](const httplib::Request&, httplib::Response& res) {
               send_json(res, 200, {{"status", "ok"}, {"model_checkpoint", sessions.model().checkpoint}});
             }));

  server.Post("/sessions", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req, false);
                const auto setup = parse_setup(body.value("setup", std::string("natural")));
                if (!setup) throw ServiceError(400, "invalid_request", "setup must be 'natural' or 'synthetic'");
                if (body.contains("model") && body["model"] != sessions.model().checkpoint) {
                  throw ServiceError(404, "unknown_model", "model is not loaded by this service");
                }
                if (!body.contains("seed_context")) throw ServiceError(400, "empty_seed", "seed_context is required");
                const auto seed = seed_from_json(body["seed_context"]);
                const auto options = options_from_json(body.value("options", nlohmann::json::object()));
                send_json(res, 201, {{"session_id", sessions.create(*setup, seed, options)}});
              }));

  server.Post(R"(/sessions/([^/]+)/utterance)",
              guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                const auto body = parse_body(req, false);
                if (!body.contains("text") || !body["text"].is_string()) {
                  throw ServiceError(400, "invalid_request", "text must be a string");
                }
                send_json(res, 200, to_json(sessions.post_utterance(req.matches[1], body["text"].get<std::string>())));
              }));

  server.Post(R"(/sessions/([^/]+)/step)", guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, to_json(sessions.step(req.matches[1])));
              }));

  server.Get(R"(/sessions/([^/]+)/transcript)",
             guarded([&sessions](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, transcript_json(sessions.transcript(req.matches[1])));
             }));
}

}  // namespace actgen
