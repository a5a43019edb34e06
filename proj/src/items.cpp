#include "gridagent/items.hpp"

#include <algorithm>
#include <sstream>

namespace gridagent {

namespace {

constexpr std::array<std::string_view, kItemCount> kItemNames = {
    "log",   "seed",    "dirt",   "stone",          "iron_ore",
    "diamond", "plank", "crafting_table", "stick", "wooden_pickaxe",
    "furnace", "stone_pickaxe", "iron_ingot", "iron_pickaxe",
};

const std::array<CellInfo, kCellKindCount> kCells = {{
    {std::nullopt, 0, true, '.', "air"},
    {Item::log, 0, false, 'T', "tree"},
    {Item::seed, 0, false, 'g', "grass"},
    {Item::dirt, 0, false, 'd', "dirt"},
    {Item::stone, 1, false, 's', "stone"},
    {Item::iron_ore, 2, false, 'i', "iron_ore"},
    {Item::diamond, 3, false, 'D', "diamond_ore"},
    {std::nullopt, kUnminable, false, '#', "bedrock"},
}};

}  // namespace

const CellInfo& cell_info(CellKind kind) { return kCells.at(static_cast<std::size_t>(kind)); }

std::string_view item_name(Item item) { return kItemNames.at(static_cast<std::size_t>(item)); }

std::optional<Item> parse_item(std::string_view name) {
  for (int i = 0; i < kItemCount; ++i) {
    if (kItemNames[static_cast<std::size_t>(i)] == name) return static_cast<Item>(i);
  }
  return std::nullopt;
}

Item item_from_index(int index) {
  if (index < 0 || index >= kItemCount) throw Error("item index out of range: " + std::to_string(index));
  return static_cast<Item>(index);
}

int tool_tier(Item item) {
  switch (item) {
    case Item::wooden_pickaxe: return 1;
    case Item::stone_pickaxe: return 2;
    case Item::iron_pickaxe: return 3;
    default: return 0;
  }
}

Item pickaxe_for_tier(int tier) {
  switch (tier) {
    case 1: return Item::wooden_pickaxe;
    case 2: return Item::stone_pickaxe;
    case 3: return Item::iron_pickaxe;
    default: throw Error("no pickaxe for tier " + std::to_string(tier));
  }
}

std::optional<CellKind> source_cell(Item item) {
  for (int k = 0; k < kCellKindCount; ++k) {
    if (kCells[static_cast<std::size_t>(k)].yield == item) return static_cast<CellKind>(k);
  }
  return std::nullopt;
}

int gather_tier(Item item) {
  auto cell = source_cell(item);
  return cell ? cell_info(*cell).required_tier : 0;
}

int held_tool_tier(const Inventory& inv) {
  int best = 0;
  for (int i = 0; i < kItemCount; ++i) {
    if (inv[static_cast<std::size_t>(i)] > 0) best = std::max(best, tool_tier(static_cast<Item>(i)));
  }
  return best;
}

std::string format_inventory(const Inventory& inv) {
  std::ostringstream out;
  bool any = false;
  for (int i = 0; i < kItemCount; ++i) {
    if (inv[static_cast<std::size_t>(i)] == 0) continue;
    if (any) out << ' ';
    out << kItemNames[static_cast<std::size_t>(i)] << '=' << inv[static_cast<std::size_t>(i)];
    any = true;
  }
  if (!any) out << "(empty)";
  return out.str();
}

}  // namespace gridagent
