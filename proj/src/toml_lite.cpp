#include "rtn/toml_lite.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>
#include <string>

#include "rtn/serialize.hpp"

namespace rtn::io {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
    throw std::runtime_error("config line " + std::to_string(line) + ": " + what);
}

bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

/// Strips a trailing comment, honoring quotes.
std::string_view strip_comment(std::string_view line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

class ValueParser {
  public:
    ValueParser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    nlohmann::json parse() {
        skip_spaces();
        auto value = parse_value();
        skip_spaces();
        if (pos_ != text_.size()) fail(line_, "trailing characters after value");
        return value;
    }

  private:
    void skip_spaces() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    nlohmann::json parse_value() {
        if (pos_ >= text_.size()) fail(line_, "missing value");
        const char c = text_[pos_];
        if (c == '"') return parse_string();
        if (c == '[') return parse_array();
        return parse_scalar();
    }

    nlohmann::json parse_string() {
        ++pos_;  // opening quote
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) fail(line_, "unterminated escape");
                const char escape = text_[pos_++];
                switch (escape) {
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case 'r': c = '\r'; break;
                    default: fail(line_, std::string("unsupported escape \\") + escape);
                }
            }
            out += c;
        }
        if (pos_ >= text_.size()) fail(line_, "unterminated string");
        ++pos_;  // closing quote
        return out;
    }

    nlohmann::json parse_array() {
        ++pos_;  // opening bracket
        nlohmann::json array = nlohmann::json::array();
        skip_spaces();
        if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            return array;
        }
        while (true) {
            skip_spaces();
            array.push_back(parse_value());
            skip_spaces();
            if (pos_ >= text_.size()) fail(line_, "unterminated array");
            if (text_[pos_] == ',') {
                ++pos_;
                skip_spaces();
                if (pos_ < text_.size() && text_[pos_] == ']') {  // trailing comma
                    ++pos_;
                    return array;
                }
                continue;
            }
            if (text_[pos_] == ']') {
                ++pos_;
                return array;
            }
            fail(line_, "expected ',' or ']' in array");
        }
    }

    nlohmann::json parse_scalar() {
        std::size_t end = pos_;
        while (end < text_.size() && text_[end] != ',' && text_[end] != ']' &&
               !std::isspace(static_cast<unsigned char>(text_[end]))) {
            ++end;
        }
        const std::string_view token = text_.substr(pos_, end - pos_);
        pos_ = end;
        if (token == "true") return true;
        if (token == "false") return false;
        const bool integral =
            token.find('.') == std::string_view::npos &&
            token.find('e') == std::string_view::npos &&
            token.find('E') == std::string_view::npos;
        if (integral) {
            std::int64_t value = 0;
            const auto [ptr, ec] =
                std::from_chars(token.data(), token.data() + token.size(), value);
            if (ec == std::errc() && ptr == token.data() + token.size()) return value;
        }
        double value = 0.0;
        const auto [ptr, ec] =
            std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec == std::errc() && ptr == token.data() + token.size()) return value;
        fail(line_, "cannot parse value '" + std::string(token) + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_;
};

std::vector<std::string> parse_dotted_key(std::string_view text, std::size_t line) {
    std::vector<std::string> parts;
    std::string current;
    for (char c : text) {
        if (c == '.') {
            if (current.empty()) fail(line, "empty key segment");
            parts.push_back(std::move(current));
            current.clear();
        } else if (is_bare_key_char(c)) {
            current += c;
        } else {
            fail(line, std::string("invalid key character '") + c + "'");
        }
    }
    if (current.empty()) fail(line, "empty key segment");
    parts.push_back(std::move(current));
    return parts;
}

nlohmann::json* descend(nlohmann::json& root, const std::vector<std::string>& path,
                        std::size_t line) {
    nlohmann::json* node = &root;
    for (const auto& part : path) {
        if (!node->is_object()) fail(line, "key path crosses a non-table value");
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
    }
    return node;
}

}  // namespace

nlohmann::json parse_toml_lite(std::string_view text) {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw(text.data() + start, end - start);
        start = end + 1;
        ++line_number;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const auto line = trim(strip_comment(raw));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(line_number, "unterminated table header");
            const auto name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) fail(line_number, "empty table name");
            const auto path = parse_dotted_key(name, line_number);
            table = descend(root, path, line_number);
            if (!table->is_object()) fail(line_number, "table redefines a value");
            continue;
        }

        const auto equals = line.find('=');
        if (equals == std::string_view::npos) fail(line_number, "expected 'key = value'");
        const auto key_text = trim(line.substr(0, equals));
        if (key_text.empty()) fail(line_number, "missing key");
        const auto value_text = trim(line.substr(equals + 1));
        const auto path = parse_dotted_key(key_text, line_number);

        nlohmann::json* parent = table;
        if (path.size() > 1) {
            parent = descend(*table, {path.begin(), path.end() - 1}, line_number);
            if (!parent->is_object()) fail(line_number, "key path crosses a non-table value");
        }
        if (parent->contains(path.back())) {
            fail(line_number, "duplicate key '" + path.back() + "'");
        }
        (*parent)[path.back()] = ValueParser(value_text, line_number).parse();
    }
    return root;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    const auto body = trim(text);
    if (path.extension() == ".json" || (!body.empty() && body.front() == '{')) {
        try {
            return nlohmann::json::parse(text);
        } catch (const std::exception& e) {
            throw std::runtime_error("invalid JSON config " + path.string() + ": " + e.what());
        }
    }
    try {
        return parse_toml_lite(text);
    } catch (const std::exception& e) {
        throw std::runtime_error("invalid config " + path.string() + ": " + e.what());
    }
}

}  // namespace rtn::io
