"""Reference shortest-energy search on the identical drive-energy graph."""
import networkx as nx

from agplan.ground import drive_cost, feasible_node


def energy_graph(grid, params, limits):
    G = nx.DiGraph()
    for r in range(grid.nrows):
        for c in range(grid.ncols):
            a = (c, r)
            if not feasible_node(grid, a, limits):
                continue
            for b in grid.neighbors(a):
                if feasible_node(grid, b, limits):
                    G.add_edge(a, tuple(b), weight=drive_cost(grid, params, a, b))
    return G


def dijkstra_energy(grid, params, limits, start, goal):
    G = energy_graph(grid, params, limits)
    return nx.dijkstra_path_length(G, tuple(start), tuple(goal))
