#pragma once

#include <array>
#include <string_view>

namespace gal::anchor_banks {

/// Anchor templates for object personalization.
inline constexpr std::array<std::string_view, 18> kObject = {
    "{SOI} in park",          "{SOI} near a pool",         "{SOI} on street",
    "{SOI} in a forest",      "{SOI} in a kitchen",        "{SOI} on the beach",
    "{SOI} in a restaurant",  "{SOI} on snowy ground",     "{SOI} on the moon",
    "{SOI} in desert",        "{SOI} in library",          "{SOI} under the night sky",
    "{SOI} in front of the castle", "{SOI} on the bridge", "{SOI} next to waterfall",
    "{SOI} in the cave",      "{SOI} at a concert venue",  "{SOI} on a balcony",
};

/// Anchor templates for style personalization.
inline constexpr std::array<std::string_view, 18> kStyle = {
    "A tie in style {SOI}",      "A table in style {SOI}",        "A broccoli in style {SOI}",
    "A box in style {SOI}",      "Candy in style {SOI}",          "A billboard in style {SOI}",
    "A drum in style {SOI}",     "A cell phone in style {SOI}",   "An empty bottle in style {SOI}",
    "A glass in style {SOI}",    "A golden key in style {SOI}",   "A koala in style {SOI}",
    "A toy in style {SOI}",      "A skateboard in style {SOI}",   "An apple on the table in style {SOI}",
    "A bridge in style {SOI}",   "Beach scene in style {SOI}",    "A banana on the table in style {SOI}",
};

}  // namespace gal::anchor_banks
