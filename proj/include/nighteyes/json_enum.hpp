#pragma once

// Enum <-> JSON string mapping that rejects unknown names. The stock
// nlohmann macro silently maps them to the first enumerator.

#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#define NIGHTEYES_JSON_ENUM(ENUM_TYPE, ...)                                                          \
    inline void to_json(nlohmann::json& j, const ENUM_TYPE& e) {                                     \
        static const std::pair<ENUM_TYPE, const char*> m[] = __VA_ARGS__;                            \
        for (const auto& [v, name] : m) {                                                            \
            if (v == e) {                                                                            \
                j = name;                                                                            \
                return;                                                                              \
            }                                                                                        \
        }                                                                                            \
        throw std::invalid_argument("unmapped " #ENUM_TYPE " value");                                \
    }                                                                                                \
    inline void from_json(const nlohmann::json& j, ENUM_TYPE& e) {                                   \
        static const std::pair<ENUM_TYPE, const char*> m[] = __VA_ARGS__;                            \
        if (!j.is_string()) throw std::invalid_argument(#ENUM_TYPE " must be a string");             \
        const auto& s = j.get_ref<const std::string&>();                                             \
        for (const auto& [v, name] : m) {                                                            \
            if (s == name) {                                                                         \
                e = v;                                                                               \
                return;                                                                              \
            }                                                                                        \
        }                                                                                            \
        throw std::invalid_argument("unknown " #ENUM_TYPE " '" + s + "'");                           \
    }
