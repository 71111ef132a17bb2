#include "gal/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <set>
#include <string>
#include <vector>

namespace gal {
namespace {

class TomlParser {
public:
    explicit TomlParser(std::string_view text) : text_(text) {}

    Json parse() {
        Json root = Json::object();
        Json* table = &root;
        while (true) {
            skip_ws_and_newlines();
            if (eof()) {
                break;
            }
            if (peek() == '[') {
                ++pos_;
                if (peek() == '[') {
                    fail("arrays of tables are not supported");
                }
                auto path = parse_key_path();
                skip_inline_ws();
                expect(']');
                table = &descend(root, path, true);
            } else {
                auto path = parse_key_path();
                skip_inline_ws();
                expect('=');
                skip_inline_ws();
                Json value = parse_value();
                assign(*table, path, std::move(value));
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("TOML line " + std::to_string(line_) + ": " + msg);
    }

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    void expect(char c) {
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) {
            ++pos_;
        }
    }

    void skip_comment() {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') {
                ++pos_;
            }
        }
    }

    void skip_ws_and_newlines() {
        while (!eof()) {
            skip_inline_ws();
            skip_comment();
            if (peek() == '\r' || peek() == '\n') {
                if (peek() == '\n') {
                    ++line_;
                }
                ++pos_;
                continue;
            }
            break;
        }
    }

    void end_of_line() {
        skip_inline_ws();
        skip_comment();
        if (eof()) {
            return;
        }
        if (peek() == '\r') {
            ++pos_;
        }
        if (peek() != '\n') {
            fail("unexpected trailing characters");
        }
    }

    std::string parse_key() {
        skip_inline_ws();
        if (peek() == '"') {
            return parse_basic_string();
        }
        if (peek() == '\'') {
            return parse_literal_string();
        }
        std::string key;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
            key.push_back(text_[pos_++]);
        }
        if (key.empty()) {
            fail("expected a key");
        }
        return key;
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_key()};
        skip_inline_ws();
        while (peek() == '.') {
            ++pos_;
            path.push_back(parse_key());
            skip_inline_ws();
        }
        return path;
    }

    Json& descend(Json& root, const std::vector<std::string>& path, bool header) {
        Json* cur = &root;
        for (std::size_t i = 0; i < path.size(); ++i) {
            auto& next = (*cur)[path[i]];
            if (next.is_null()) {
                next = Json::object();
            } else if (!next.is_object()) {
                fail("key '" + path[i] + "' is not a table");
            } else if (header && i + 1 == path.size() && defined_tables_.count(joined(path)) != 0) {
                fail("table [" + joined(path) + "] defined twice");
            }
            cur = &next;
        }
        if (header) {
            defined_tables_.insert(joined(path));
        }
        return *cur;
    }

    static std::string joined(const std::vector<std::string>& path) {
        std::string out;
        for (const auto& p : path) {
            if (!out.empty()) {
                out.push_back('.');
            }
            out += p;
        }
        return out;
    }

    void assign(Json& table, const std::vector<std::string>& path, Json value) {
        Json* cur = &table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
            auto& next = (*cur)[path[i]];
            if (next.is_null()) {
                next = Json::object();
            } else if (!next.is_object()) {
                fail("key '" + path[i] + "' is not a table");
            }
            cur = &next;
        }
        if (cur->contains(path.back())) {
            fail("duplicate key '" + path.back() + "'");
        }
        (*cur)[path.back()] = std::move(value);
    }

    Json parse_value() {
        const char c = peek();
        if (c == '"') {
            return parse_basic_string();
        }
        if (c == '\'') {
            return parse_literal_string();
        }
        if (c == '[') {
            return parse_array();
        }
        if (c == '{') {
            return parse_inline_table();
        }
        if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') {
                fail("unterminated string");
            }
            char c = text_[pos_++];
            if (c == '"') {
                break;
            }
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (eof()) {
                fail("unterminated escape");
            }
            c = text_[pos_++];
            switch (c) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'b': out.push_back('\b'); break;
                case 'f': out.push_back('\f'); break;
                case 'u': append_utf8(parse_hex(4), out); break;
                case 'U': append_utf8(parse_hex(8), out); break;
                default: fail(std::string("unknown escape \\") + c);
            }
        }
        return out;
    }

    std::uint32_t parse_hex(int digits) {
        if (pos_ + static_cast<std::size_t>(digits) > text_.size()) {
            fail("truncated unicode escape");
        }
        std::uint32_t cp = 0;
        auto res = std::from_chars(text_.data() + pos_, text_.data() + pos_ + digits, cp, 16);
        if (res.ptr != text_.data() + pos_ + digits) {
            fail("bad unicode escape");
        }
        pos_ += static_cast<std::size_t>(digits);
        return cp;
    }

    static void append_utf8(std::uint32_t cp, std::string& out) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    std::string parse_literal_string() {
        expect('\'');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') {
                fail("unterminated string");
            }
            const char c = text_[pos_++];
            if (c == '\'') {
                break;
            }
            out.push_back(c);
        }
        return out;
    }

    Json parse_array() {
        expect('[');
        Json arr = Json::array();
        while (true) {
            skip_ws_and_newlines();
            if (peek() == ']') {
                ++pos_;
                return arr;
            }
            arr.push_back(parse_value());
            skip_ws_and_newlines();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws_and_newlines();
            expect(']');
            return arr;
        }
    }

    Json parse_inline_table() {
        expect('{');
        Json table = Json::object();
        skip_inline_ws();
        if (peek() == '}') {
            ++pos_;
            return table;
        }
        while (true) {
            auto path = parse_key_path();
            skip_inline_ws();
            expect('=');
            skip_inline_ws();
            assign(table, path, parse_value());
            skip_inline_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return table;
        }
    }

    Json parse_number() {
        std::string token;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                          peek() == '-' || peek() == '.' || peek() == '_')) {
            if (peek() != '_') {
                token.push_back(peek());
            }
            ++pos_;
        }
        if (token.empty()) {
            fail("expected a value");
        }
        const bool is_float = token.find_first_of(".eE") != std::string::npos;
        const char* first = token.data();
        const char* last = token.data() + token.size();
        if (*first == '+') {
            ++first;
        }
        if (is_float) {
            double v = 0.0;
            auto res = std::from_chars(first, last, v);
            if (res.ec != std::errc{} || res.ptr != last) {
                fail("bad float '" + token + "'");
            }
            return v;
        }
        std::int64_t v = 0;
        auto res = std::from_chars(first, last, v);
        if (res.ec == std::errc::result_out_of_range && *first != '-') {
            // full-width seeds
            std::uint64_t u = 0;
            res = std::from_chars(first, last, u);
            if (res.ec == std::errc{} && res.ptr == last) {
                return u;
            }
        }
        if (res.ec != std::errc{} || res.ptr != last) {
            fail("bad integer '" + token + "'");
        }
        return v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::set<std::string> defined_tables_;
};

}  // namespace

Json parse_toml(std::string_view text) {
    return TomlParser(text).parse();
}

}  // namespace gal
