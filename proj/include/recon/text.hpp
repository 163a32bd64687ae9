// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace recon {

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

/// Lexical terms used by retrieval, relevance features and the extractive
/// condenser: ASCII-lowercased, split on anything that is not a letter or a
/// digit, empty pieces dropped. Bytes >= 0x80 are kept inside terms so UTF-8
/// words are not torn apart.
std::vector<std::string> lexical_terms(std::string_view text);

/// Token accounting for prompts and trajectories. Every length comparison in
/// the engine goes through one instance of this interface.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
    virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

class WhitespaceTokenizer final : public Tokenizer {
public:
    std::vector<std::string> tokenize(std::string_view text) const override;
    std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

}  // namespace recon
