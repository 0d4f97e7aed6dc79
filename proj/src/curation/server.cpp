#include <httplib.h>

#include "forge/curation/server.hpp"
#include "forge/datamodel/serialize.hpp"

namespace forge::curation {

using nlohmann::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
    reply_json(res, status, json{{"error", message}});
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object()) throw PreconditionError("request body must be a JSON object");
    return j;
}

// Runs a handler and maps forge errors onto HTTP statuses.
template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const NotFoundError& e) {
            reply_error(res, 404, e.what());
        } catch (const IllegalTransitionError& e) {
            reply_error(res, 409, e.what());
        } catch (const LeakError& e) {
            reply_json(res, 409, json{{"error", e.what()}, {"ids", e.ids()}});
        } catch (const ValidationError& e) {
            reply_json(res, 422, json{{"error", e.what()}, {"violations", e.violations()}});
        } catch (const ShortfallError& e) {
            reply_error(res, 422, e.what());
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed request: ") + e.what());
        } catch (const PreconditionError& e) {
            reply_error(res, 400, e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    };
}

std::string reviewer_of(const httplib::Request& req, const json& body) {
    auto r = req.get_header_value("X-Reviewer");
    if (r.empty()) r = body.value("reviewer", "");
    return r;
}

} // namespace

struct CurationServer::Impl {
    httplib::Server http;
    ServerContext context;
    std::mutex generate_mu;
};

CurationServer::CurationServer(CurationStore& store, ServerContext context)
    : impl_(std::make_unique<Impl>()), store_(store) {
    impl_->context = std::move(context);
    auto& http = impl_->http;
    auto* ctx = &impl_->context;
    auto* gen_mu = &impl_->generate_mu;
    http.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    http.Get("/api/items", guarded([this](const httplib::Request& req, httplib::Response& res) {
        std::optional<ItemState> state;
        std::optional<std::string> dept;
        if (req.has_param("state")) state = parse_item_state(req.get_param_value("state"));
        if (req.has_param("department")) dept = req.get_param_value("department");
        json out = json::array();
        for (const auto& item : store_.list(state, dept)) out.push_back(to_json(item));
        reply_json(res, 200, out);
    }));

    http.Get(R"(/api/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto item = store_.get(req.matches[1]);
        if (!item) throw NotFoundError("no curation item '" + std::string(req.matches[1]) + "'");
        reply_json(res, 200, to_json(*item));
    }));

    http.Post(R"(/api/items/([^/]+)/decision)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        Decision d;
        try {
            d.kind = parse_decision_kind(body.at("decision").get<std::string>());
        } catch (const json::exception&) {
            throw PreconditionError("body needs a \"decision\" field");
        } catch (const Error& e) {
            throw PreconditionError(e.what());
        }
        if (body.contains("edited_version")) d.edited = body.at("edited_version").get<DialogueSample>();
        d.notes = body.value("notes", "");
        reply_json(res, 200, to_json(store_.submit(req.matches[1], d, reviewer_of(req, body))));
    }));

    http.Post(R"(/api/items/([^/]+)/promote)", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        Decision d{DecisionKind::promote, std::nullopt, body.value("notes", "")};
        reply_json(res, 200, to_json(store_.submit(req.matches[1], d, reviewer_of(req, body))));
    }));

    http.Post("/api/candidates", guarded([this, ctx](const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        if (ctx->candidate_pool.empty()) {
            reply_error(res, 503, "no candidate pool configured");
            return;
        }
        const auto existing = store_.ids();
        std::vector<DialogueSample> pool;
        for (const auto& s : ctx->candidate_pool)
            if (!existing.contains(s.id)) pool.push_back(s);
        auto items = select_candidates(pool, ctx->exclusion_ids, body.at("target").get<std::size_t>(),
                                       body.value("seed", std::uint64_t{0}));
        store_.add(items);
        reply_json(res, 200, json{{"added", items.size()}});
    }));

    http.Post("/api/generate", guarded([this, ctx, gen_mu](const httplib::Request& req, httplib::Response& res) {
        auto body = body_of(req);
        if (!ctx->gateway) {
            reply_error(res, 503, "no generation backend configured");
            return;
        }
        auto options = ctx->generation;
        options.target = body.value("target", options.target);
        options.exemplars_per_prompt = body.value("k", options.exemplars_per_prompt);
        options.seed = body.value("seed", options.seed);
        std::lock_guard lock(*gen_mu);
        GenerationBatch batch;
        try {
            batch = generate_into_store(store_, *ctx->gateway, options);
        } catch (const PreconditionError& e) {
            reply_error(res, 422, e.what());
            return;
        }
        reply_json(res, 200, json{{"generated", batch.items.size()}, {"quarantined", batch.quarantine.size()}});
    }));

    http.Get("/api/export", guarded([this, ctx](const httplib::Request&, httplib::Response& res) {
        std::string out;
        for (const auto& s : export_preference_set(store_, ctx->exclusion_ids)) out += json(s).dump() + "\n";
        res.status = 200;
        res.set_content(out, "application/x-ndjson");
    }));

    http.Get("/api/stats", guarded([this, ctx](const httplib::Request&, httplib::Response& res) {
        auto s = store_.stats();
        const auto done = s.by_state["accepted"] + s.by_state["edited"];
        reply_json(res, 200,
                   json{{"total", s.total},
                        {"by_state", s.by_state},
                        {"target", ctx->target},
                        {"remaining", done >= ctx->target ? 0 : ctx->target - done}});
    }));
}

CurationServer::~CurationServer() { stop(); }

int CurationServer::start(const std::string& host, int port) {
    auto& http = impl_->http;
    if (port == 0)
        port_ = http.bind_to_any_port(host);
    else
        port_ = http.bind_to_port(host, port) ? port : -1;
    if (port_ < 0) throw Error("cannot bind curation API to " + host + ":" + std::to_string(port));
    thread_ = std::thread([&http] { http.listen_after_bind(); });
    http.wait_until_ready();
    return port_;
}

void CurationServer::serve(const std::string& host, int port) {
    auto& http = impl_->http;
    if (!http.bind_to_port(host, port)) throw Error("cannot bind curation API to " + host + ":" + std::to_string(port));
    port_ = port;
    http.listen_after_bind();
    store_.flush();
}

void CurationServer::stop() {
    if (impl_->http.is_running()) impl_->http.stop();
    if (thread_.joinable()) thread_.join();
    store_.flush();
}

} // namespace forge::curation
