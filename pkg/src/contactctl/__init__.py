"""Control and simulation stack for contact-rich manipulation experiments.

Subsystems: serial-chain kinematics with damped-least-squares IK, a
deterministic rigid-body plant with penalty contact, gravity-compensated
force/torque sensing, a bilateral master-slave gripper loop, compilation of
policy action chunks into virtual-target compliance commands, joint-space
impedance execution, multimodal episode recording, and scripted experiment
scenarios with a CLI front end.
"""

__version__ = "0.1.0"
