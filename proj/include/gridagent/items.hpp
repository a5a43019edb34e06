#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gridagent {

// Base error for everything the library throws on bad input or bad state.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values in a forward pass or loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Items in tech-tree order. The order is part of the observation layout
// (inventory vector) and of the planner's tie-break, so it is frozen.
enum class Item : std::uint8_t {
  log,
  seed,
  dirt,
  stone,
  iron_ore,
  diamond,
  plank,
  crafting_table,
  stick,
  wooden_pickaxe,
  furnace,
  stone_pickaxe,
  iron_ingot,
  iron_pickaxe,
};
inline constexpr int kItemCount = 14;

enum class CellKind : std::uint8_t {
  air,
  tree,
  grass,
  dirt,
  stone,
  iron_ore,
  diamond_ore,
  bedrock,
};
inline constexpr int kCellKindCount = 8;

// Tool tier needed to mine a cell. Bedrock is never minable.
inline constexpr int kUnminable = 255;

struct CellInfo {
  std::optional<Item> yield;
  int required_tier;
  bool passable;
  char glyph;
  std::string_view name;
};

const CellInfo& cell_info(CellKind kind);

std::string_view item_name(Item item);
std::optional<Item> parse_item(std::string_view name);
Item item_from_index(int index);
inline int index_of(Item item) { return static_cast<int>(item); }

// Pickaxe tier of an item: 1 wooden, 2 stone, 3 iron, 0 for everything else.
int tool_tier(Item item);
// The cheapest pickaxe that reaches `tier` (tier in 1..3).
Item pickaxe_for_tier(int tier);

// Cell kind that yields `item` when mined, if the item is gathered from the world.
std::optional<CellKind> source_cell(Item item);
// Tool tier needed to gather a collectible item (0 if no tool needed).
int gather_tier(Item item);

using Inventory = std::array<int, kItemCount>;

inline int& at(Inventory& inv, Item item) { return inv[static_cast<std::size_t>(item)]; }
inline int at(const Inventory& inv, Item item) { return inv[static_cast<std::size_t>(item)]; }

// Best pickaxe tier held (0 = none).
int held_tool_tier(const Inventory& inv);

std::string format_inventory(const Inventory& inv);

}  // namespace gridagent
