# Swarm kinematics, runners, evolution and planning
