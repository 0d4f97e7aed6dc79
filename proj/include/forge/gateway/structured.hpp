#pragma once

#include <optional>
#include <string>
#include <variant>

#include "forge/gateway/gateway.hpp"

namespace forge::gateway {

template <class T>
struct StructuredReply {
    std::optional<T> value;
    std::string reply;    // last raw reply
    std::string problem;  // parser complaint when value is empty
    ChatRequest request;  // request that produced `reply`
    std::size_t attempts = 0;
};

/// Sends `request`, parses the reply, and on a parse failure retries once
/// with the bad reply and a correction appended to the conversation.
/// `parse` returns either the value or a description of the problem.
template <class T, class Parse>
StructuredReply<T> chat_structured(Gateway& gw, ChatRequest request, Parse parse, const std::string& reminder) {
    StructuredReply<T> out;
    for (std::size_t attempt = 1; attempt <= 2; ++attempt) {
        out.attempts = attempt;
        out.reply = gw.chat(request).content;
        out.request = request;
        std::variant<T, std::string> parsed = parse(out.reply);
        if (auto* v = std::get_if<T>(&parsed)) {
            out.value = std::move(*v);
            out.problem.clear();
            return out;
        }
        out.problem = std::get<std::string>(parsed);
        request.messages.push_back({MessageRole::assistant, out.reply});
        request.messages.push_back({MessageRole::user, "That reply could not be used: " + out.problem + ". " + reminder});
    }
    return out;
}

} // namespace forge::gateway
