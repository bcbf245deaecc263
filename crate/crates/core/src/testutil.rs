use crate::netbuild::{Edge, FriendshipNetwork, NetworkKind};

/// Unit-weight graph on nodes `n000, n001, ...`.
pub(crate) fn graph(n: usize, pairs: &[(usize, usize)]) -> FriendshipNetwork {
    let nodes = (0..n).map(|i| format!("n{i:03}")).collect();
    let edges = pairs.iter().map(|&(u, v)| Edge { u, v, weight: 1 }).collect();
    FriendshipNetwork::from_edges(NetworkKind::Interaction, nodes, edges).unwrap()
}
