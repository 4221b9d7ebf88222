#include "orcha/extent_expr.hpp"

#include "orcha/error.hpp"

#include <cctype>

namespace orcha {

namespace {

class ExprParser {
public:
    ExprParser(std::string_view text, const MeshParams* params) : text_(text), params_(params) {}

    std::int64_t parse() {
        auto value = sum();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return value;
    }

private:
    std::int64_t sum() {
        auto value = product();
        for (;;) {
            skip_ws();
            if (accept('+')) value += product();
            else if (accept('-')) value -= product();
            else return value;
        }
    }

    std::int64_t product() {
        auto value = unary();
        for (;;) {
            skip_ws();
            if (accept('*')) value *= unary();
            else return value;
        }
    }

    std::int64_t unary() {
        skip_ws();
        if (accept('-')) return -unary();
        return primary();
    }

    std::int64_t primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            auto value = sum();
            skip_ws();
            if (!accept(')')) fail("missing ')'");
            return value;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::int64_t value = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                value = value * 10 + (text_[pos_++] - '0');
            return value;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            auto start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            return lookup(text_.substr(start, pos_ - start));
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    std::int64_t lookup(std::string_view name) {
        MeshParams defaults;
        const MeshParams& p = params_ ? *params_ : defaults;
        if (name == "nxb") return p.nxb;
        if (name == "nyb") return p.nyb;
        if (name == "nguard") return p.nguard;
        if (name == "nvars") return p.nvars;
        fail("unknown identifier '" + std::string(name) + "'");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw Error(Errc::ExpressionError, "in '" + std::string(text_) + "': " + why);
    }

    std::string_view text_;
    const MeshParams* params_;
    std::size_t pos_ = 0;
};

}  // namespace

void check_extent_expression(std::string_view expr) {
    ExprParser(expr, nullptr).parse();
}

std::int64_t evaluate_extent(std::string_view expr, const MeshParams& params) {
    return ExprParser(expr, &params).parse();
}

std::string normalize_extent(std::string_view expr) {
    std::string out;
    for (char c : expr)
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    return out;
}

}  // namespace orcha
