#pragma once

// Parser for a BIF subset covering discrete networks: `network`, `variable`
// and `probability` blocks. `property` annotations are accepted and ignored.
//
//   network <name> { }
//   variable <v> { type discrete [ k ] { s1, ..., sk }; }
//   probability ( <v> | <p1>, <p2> ) {
//       table p11, ..., p1k, p21, ...;      // row-major, first parent slowest
//       ( s_a, s_b ) p1, ..., pk;           // or one row per parent config
//   }
//
// Probability rows must sum to 1 within 1e-6 and are renormalised exactly.
// Unless a target is supplied, the last declared variable becomes the
// classification target.

#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabbench/error.hpp"
#include "tabbench/scm.hpp"

namespace tabbench {

namespace bif_detail {

struct Token {
    enum Kind { Word, Number, Punct, End } kind = End;
    std::string text;
    double value = 0.0;
    std::size_t line = 0, col = 0;
};

class Lexer {
public:
    explicit Lexer(const std::string& text) : text_(text) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, tok_.line, tok_.col);
    }

private:
    void advance() {
        skip_space();
        tok_.line = line_;
        tok_.col = col_;
        if (pos_ >= text_.size()) {
            tok_.kind = Token::End;
            tok_.text.clear();
            return;
        }
        char ch = text_[pos_];
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
            std::string word;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                           text_[pos_] == '_' || text_[pos_] == '-' ||
                                           text_[pos_] == '.')) {
                word += text_[pos_];
                step();
            }
            tok_.kind = Token::Word;
            tok_.text = std::move(word);
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == '-' || ch == '+') {
            std::string num;
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                    text_[pos_] == '-' || text_[pos_] == '+' || text_[pos_] == 'e' ||
                    text_[pos_] == 'E')) {
                num += text_[pos_];
                step();
            }
            try {
                tok_.value = std::stod(num);
            } catch (...) {
                throw ParseError("malformed number '" + num + "'", tok_.line, tok_.col);
            }
            tok_.kind = Token::Number;
            tok_.text = std::move(num);
            return;
        }
        tok_.kind = Token::Punct;
        tok_.text = std::string(1, ch);
        step();
    }

    void skip_space() {
        while (pos_ < text_.size()) {
            char ch = text_[pos_];
            if (ch == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                while (pos_ < text_.size() && text_[pos_] != '\n') step();
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                step();
            } else {
                break;
            }
        }
    }

    void step() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    const std::string& text_;
    std::size_t pos_ = 0, line_ = 1, col_ = 1;
    Token tok_;
};

struct RawProbability {
    std::string variable;
    std::vector<std::string> parents;
    std::vector<double> flat;                              // from `table`
    std::vector<std::pair<std::vector<std::string>, std::vector<double>>> rows;
    std::size_t line = 0, col = 0;
};

} // namespace bif_detail

inline ScmModel parse_bif(const std::string& text,
                          std::optional<std::string> target = {}) {
    using bif_detail::Lexer;
    using bif_detail::Token;
    Lexer lex(text);
    if (lex.peek().kind == Token::End)
        throw ParseError("empty document", 1, 1);

    auto expect_word = [&](const std::string& what) -> Token {
        if (lex.peek().kind != Token::Word) lex.fail("expected " + what);
        return lex.take();
    };
    auto expect_punct = [&](const std::string& p) {
        if (lex.peek().kind != Token::Punct || lex.peek().text != p)
            lex.fail("expected '" + p + "'");
        lex.take();
    };
    auto skip_property = [&]() {
        // `property` runs to the next semicolon.
        while (lex.peek().kind != Token::End &&
               !(lex.peek().kind == Token::Punct && lex.peek().text == ";"))
            lex.take();
        expect_punct(";");
    };

    std::string network_name = "network";
    std::vector<std::string> variable_order;
    std::map<std::string, std::vector<std::string>> states;
    std::vector<bif_detail::RawProbability> probabilities;

    while (lex.peek().kind != Token::End) {
        Token kw = expect_word("'network', 'variable' or 'probability'");
        if (kw.text == "network") {
            network_name = expect_word("network name").text;
            expect_punct("{");
            while (!(lex.peek().kind == Token::Punct && lex.peek().text == "}")) {
                if (lex.peek().kind == Token::End) lex.fail("unterminated network block");
                if (lex.peek().kind == Token::Word && lex.peek().text == "property") {
                    lex.take();
                    skip_property();
                } else {
                    lex.take();
                }
            }
            expect_punct("}");
        } else if (kw.text == "variable") {
            Token name = expect_word("variable name");
            if (states.count(name.text))
                throw ParseError("duplicate variable '" + name.text + "'", name.line, name.col);
            expect_punct("{");
            std::vector<std::string> var_states;
            while (!(lex.peek().kind == Token::Punct && lex.peek().text == "}")) {
                if (lex.peek().kind == Token::End) lex.fail("unterminated variable block");
                Token inner = expect_word("'type' or 'property'");
                if (inner.text == "property") {
                    skip_property();
                    continue;
                }
                if (inner.text != "type") lex.fail("expected 'type'");
                Token kind = expect_word("'discrete'");
                if (kind.text != "discrete")
                    throw ParseError("unsupported variable type '" + kind.text + "'",
                                     kind.line, kind.col);
                expect_punct("[");
                if (lex.peek().kind != Token::Number) lex.fail("expected state count");
                auto declared = static_cast<std::size_t>(lex.take().value);
                expect_punct("]");
                expect_punct("{");
                while (true) {
                    Token s = lex.take();
                    if (s.kind != Token::Word && s.kind != Token::Number)
                        throw ParseError("expected state label", s.line, s.col);
                    var_states.push_back(s.text);
                    if (lex.peek().kind == Token::Punct && lex.peek().text == ",") {
                        lex.take();
                        continue;
                    }
                    break;
                }
                expect_punct("}");
                expect_punct(";");
                if (var_states.size() != declared)
                    throw ParseError("variable '" + name.text + "' declares " +
                                         std::to_string(declared) + " states but lists " +
                                         std::to_string(var_states.size()),
                                     name.line, name.col);
            }
            expect_punct("}");
            if (var_states.empty())
                throw ParseError("variable '" + name.text + "' has no states", name.line,
                                 name.col);
            variable_order.push_back(name.text);
            states[name.text] = std::move(var_states);
        } else if (kw.text == "probability") {
            bif_detail::RawProbability rp;
            rp.line = kw.line;
            rp.col = kw.col;
            expect_punct("(");
            rp.variable = expect_word("variable name").text;
            if (lex.peek().kind == Token::Punct && lex.peek().text == "|") {
                lex.take();
                while (true) {
                    rp.parents.push_back(expect_word("parent name").text);
                    if (lex.peek().kind == Token::Punct && lex.peek().text == ",") {
                        lex.take();
                        continue;
                    }
                    break;
                }
            }
            expect_punct(")");
            expect_punct("{");
            while (!(lex.peek().kind == Token::Punct && lex.peek().text == "}")) {
                if (lex.peek().kind == Token::End) lex.fail("unterminated probability block");
                if (lex.peek().kind == Token::Word && lex.peek().text == "property") {
                    lex.take();
                    skip_property();
                    continue;
                }
                if (lex.peek().kind == Token::Word && lex.peek().text == "table") {
                    lex.take();
                    while (lex.peek().kind == Token::Number ||
                           (lex.peek().kind == Token::Punct && lex.peek().text == ",")) {
                        if (lex.peek().kind == Token::Punct)
                            lex.take();
                        else
                            rp.flat.push_back(lex.take().value);
                    }
                    expect_punct(";");
                    continue;
                }
                if (lex.peek().kind == Token::Punct && lex.peek().text == "(") {
                    lex.take();
                    std::vector<std::string> cfg;
                    while (true) {
                        Token s = lex.take();
                        if (s.kind != Token::Word && s.kind != Token::Number)
                            throw ParseError("expected parent state label", s.line, s.col);
                        cfg.push_back(s.text);
                        if (lex.peek().kind == Token::Punct && lex.peek().text == ",") {
                            lex.take();
                            continue;
                        }
                        break;
                    }
                    expect_punct(")");
                    std::vector<double> row;
                    while (lex.peek().kind == Token::Number ||
                           (lex.peek().kind == Token::Punct && lex.peek().text == ",")) {
                        if (lex.peek().kind == Token::Punct)
                            lex.take();
                        else
                            row.push_back(lex.take().value);
                    }
                    expect_punct(";");
                    rp.rows.emplace_back(std::move(cfg), std::move(row));
                    continue;
                }
                lex.fail("expected 'table', a parent-state tuple, or 'property'");
            }
            expect_punct("}");
            probabilities.push_back(std::move(rp));
        } else {
            throw ParseError("unexpected keyword '" + kw.text + "'", kw.line, kw.col);
        }
    }

    if (variable_order.empty()) throw ParseError("document declares no variables", 1, 1);

    // Assemble CPDs in declaration order.
    std::map<std::string, const bif_detail::RawProbability*> prob_of;
    for (const auto& rp : probabilities) {
        if (!states.count(rp.variable))
            throw ParseError("probability block for undeclared variable '" + rp.variable + "'",
                             rp.line, rp.col);
        for (const auto& p : rp.parents)
            if (!states.count(p))
                throw ParseError("undeclared parent '" + p + "' of variable '" + rp.variable +
                                     "'",
                                 rp.line, rp.col);
        if (!prob_of.emplace(rp.variable, &rp).second)
            throw ParseError("duplicate probability block for '" + rp.variable + "'", rp.line,
                             rp.col);
    }

    std::vector<NodeCpd> cpds;
    for (const auto& v : variable_order) {
        auto it = prob_of.find(v);
        if (it == prob_of.end())
            throw ParseError("variable '" + v + "' has no probability block", 1, 1);
        const auto& rp = *it->second;
        DiscreteCpd cpd;
        cpd.variable = v;
        cpd.states = states.at(v);
        cpd.parents = rp.parents;
        std::size_t rows = 1;
        for (const auto& p : rp.parents) rows *= states.at(p).size();
        const std::size_t k = cpd.states.size();
        cpd.table.assign(rows, std::vector<double>(k, 0.0));
        std::vector<bool> filled(rows, false);

        if (!rp.flat.empty()) {
            if (rp.flat.size() != rows * k)
                throw ParseError("variable '" + v + "': table lists " +
                                     std::to_string(rp.flat.size()) + " values, expected " +
                                     std::to_string(rows * k),
                                 rp.line, rp.col);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t s = 0; s < k; ++s) cpd.table[r][s] = rp.flat[r * k + s];
                filled[r] = true;
            }
        }
        for (const auto& [cfg, row] : rp.rows) {
            if (cfg.size() != rp.parents.size())
                throw ParseError("variable '" + v + "': parent tuple lists " +
                                     std::to_string(cfg.size()) + " states, expected " +
                                     std::to_string(rp.parents.size()),
                                 rp.line, rp.col);
            std::size_t r = 0;
            for (std::size_t pi = 0; pi < cfg.size(); ++pi) {
                const auto& pstates = states.at(rp.parents[pi]);
                auto pos = std::find(pstates.begin(), pstates.end(), cfg[pi]);
                if (pos == pstates.end())
                    throw ParseError("variable '" + v + "': unknown state '" + cfg[pi] +
                                         "' of parent '" + rp.parents[pi] + "'",
                                     rp.line, rp.col);
                r = r * pstates.size() + static_cast<std::size_t>(pos - pstates.begin());
            }
            if (row.size() != k)
                throw ParseError("variable '" + v + "': row lists " +
                                     std::to_string(row.size()) + " probabilities, expected " +
                                     std::to_string(k),
                                 rp.line, rp.col);
            cpd.table[r] = row;
            filled[r] = true;
        }
        for (std::size_t r = 0; r < rows; ++r) {
            if (!filled[r])
                throw ParseError("variable '" + v + "': parent configuration " +
                                     std::to_string(r) + " has no probability row",
                                 rp.line, rp.col);
            double sum = 0.0;
            for (double p : cpd.table[r]) sum += p;
            if (std::abs(sum - 1.0) > 1e-6)
                throw ValidationError("variable '" + v + "': probability row " +
                                      std::to_string(r) + " sums to " + std::to_string(sum));
            for (double& p : cpd.table[r]) p /= sum;
        }
        cpds.emplace_back(std::move(cpd));
    }

    std::string chosen_target = target.value_or(variable_order.back());
    if (!states.count(chosen_target))
        throw ValidationError("target '" + chosen_target + "' is not a declared variable");
    return ScmModel(network_name, Task::Classification, chosen_target, std::move(cpds));
}

} // namespace tabbench
